//! Two-group labelled datasets and group fairness metrics.
//!
//! All rates are plug-in estimates from empirical frequencies with no
//! smoothing; a rate whose denominator is empty is an error, never zero.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary protected attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Group {
    Zero,
    One,
}

impl Group {
    pub const BOTH: [Group; 2] = [Group::Zero, Group::One];

    pub fn index(self) -> usize {
        match self {
            Group::Zero => 0,
            Group::One => 1,
        }
    }

    pub fn from_bit(bit: u8) -> Option<Self> {
        match bit {
            0 => Some(Group::Zero),
            1 => Some(Group::One),
            _ => None,
        }
    }

    fn bit(self) -> u8 {
        self.index() as u8
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub features: Vec<f64>,
    pub label: bool,
    pub group: Group,
}

/// Records of (features, binary label, binary group), all of one dimension.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledDataset {
    records: Vec<Record>,
    dim: usize,
}

impl LabeledDataset {
    pub fn new(records: Vec<Record>) -> Result<Self> {
        let dim = records.first().map_or(0, |r| r.features.len());
        for r in &records {
            if r.features.len() != dim {
                return Err(Error::LengthMismatch {
                    expected: dim,
                    actual: r.features.len(),
                });
            }
            if r.features.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("feature value".into()));
            }
        }
        Ok(Self { records, dim })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Feature dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn group_size(&self, group: Group) -> usize {
        self.records.iter().filter(|r| r.group == group).count()
    }

    /// Loads a CSV whose header is `f1,...,fd,label,group`.
    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file).map_err(|e| match e {
            Error::Dataset { reason, .. } => Error::Dataset {
                path: path.to_owned(),
                reason,
            },
            other => other,
        })
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let bad = |reason: String| Error::Dataset {
            path: "<reader>".into(),
            reason,
        };
        let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = csv.headers()?.clone();
        let n = header.len();
        if n < 2 || &header[n - 2] != "label" || &header[n - 1] != "group" {
            return Err(bad("header must end with `label,group`".into()));
        }
        let dim = n - 2;
        let mut records = Vec::new();
        for (line, row) in csv.records().enumerate() {
            let row = row?;
            let row_no = line + 2;
            let mut features = Vec::with_capacity(dim);
            for (col, field) in row.iter().take(dim).enumerate() {
                let x: f64 = field
                    .parse()
                    .map_err(|_| bad(format!("row {row_no}: column {} is not a number: {field:?}", &header[col])))?;
                features.push(x);
            }
            let bit = |field: &str, name: &str| -> Result<u8> {
                match field {
                    "0" => Ok(0),
                    "1" => Ok(1),
                    _ => Err(bad(format!("row {row_no}: {name} must be 0 or 1, got {field:?}"))),
                }
            };
            let label = bit(&row[dim], "label")? == 1;
            let group = Group::from_bit(bit(&row[dim + 1], "group")?).expect("bit is 0 or 1");
            records.push(Record { features, label, group });
        }
        let mut data = Self::new(records)?;
        data.dim = dim;
        Ok(data)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.dim).map(|i| format!("f{i}")).collect();
        header.push("label".into());
        header.push("group".into());
        csv.write_record(&header)?;
        for r in &self.records {
            let mut row: Vec<String> = r.features.iter().map(|x| format!("{x}")).collect();
            row.push(u8::from(r.label).to_string());
            row.push(r.group.bit().to_string());
            csv.write_record(&row)?;
        }
        csv.flush()?;
        Ok(())
    }
}

/// Confusion counts for one group.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    fn ratio(num: usize, den: usize) -> Option<f64> {
        (den > 0).then(|| num as f64 / den as f64)
    }

    pub fn accuracy(&self) -> Option<f64> {
        Self::ratio(self.tp + self.tn, self.total())
    }

    pub fn positive_rate(&self) -> Option<f64> {
        Self::ratio(self.tp + self.fp, self.total())
    }

    pub fn false_positive_rate(&self) -> Option<f64> {
        Self::ratio(self.fp, self.fp + self.tn)
    }

    pub fn true_positive_rate(&self) -> Option<f64> {
        Self::ratio(self.tp, self.tp + self.fn_)
    }
}

/// Confusion counts indexed by [`Group::index`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupConfusion(pub [Confusion; 2]);

impl GroupConfusion {
    pub fn group(&self, group: Group) -> &Confusion {
        &self.0[group.index()]
    }

    fn nonempty(&self, group: Group) -> Result<&Confusion> {
        let c = self.group(group);
        if c.total() == 0 {
            Err(Error::EmptyGroup(group.bit()))
        } else {
            Ok(c)
        }
    }

    pub fn accuracy(&self, group: Group) -> Result<f64> {
        Ok(self.nonempty(group)?.accuracy().expect("nonempty"))
    }

    pub fn positive_rate(&self, group: Group) -> Result<f64> {
        Ok(self.nonempty(group)?.positive_rate().expect("nonempty"))
    }

    pub fn false_positive_rate(&self, group: Group) -> Result<f64> {
        self.nonempty(group)?
            .false_positive_rate()
            .ok_or(Error::DegenerateLabels { group: group.bit(), missing_label: 0 })
    }

    pub fn true_positive_rate(&self, group: Group) -> Result<f64> {
        self.nonempty(group)?
            .true_positive_rate()
            .ok_or(Error::DegenerateLabels { group: group.bit(), missing_label: 1 })
    }

    pub fn overall_accuracy(&self) -> Option<f64> {
        let [a, b] = self.0;
        let total = a.total() + b.total();
        (total > 0).then(|| (a.tp + a.tn + b.tp + b.tn) as f64 / total as f64)
    }
}

pub fn confusion_by_group(predictions: &[bool], data: &LabeledDataset) -> Result<GroupConfusion> {
    if predictions.len() != data.len() {
        return Err(Error::LengthMismatch {
            expected: data.len(),
            actual: predictions.len(),
        });
    }
    let mut out = GroupConfusion::default();
    for (&pred, record) in predictions.iter().zip(data.records()) {
        let c = &mut out.0[record.group.index()];
        match (pred, record.label) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    for g in Group::BOTH {
        out.nonempty(g)?;
    }
    Ok(out)
}

/// |Pr[ŷ=1 | A=0] − Pr[ŷ=1 | A=1]|.
pub fn demographic_parity_gap(predictions: &[bool], data: &LabeledDataset) -> Result<f64> {
    let c = confusion_by_group(predictions, data)?;
    parity_gap(&c)
}

/// Alias of [`demographic_parity_gap`] under its "risk difference" name.
pub fn risk_difference(predictions: &[bool], data: &LabeledDataset) -> Result<f64> {
    demographic_parity_gap(predictions, data)
}

/// max over y of |Pr[ŷ=1 | Y=y, A=0] − Pr[ŷ=1 | Y=y, A=1]|.
///
/// The y = 0 term is the false-positive-rate gap; y = 1 the true-positive-rate gap.
pub fn equalized_odds_gap(predictions: &[bool], data: &LabeledDataset) -> Result<f64> {
    let c = confusion_by_group(predictions, data)?;
    odds_gap(&c)
}

pub(crate) fn parity_gap(c: &GroupConfusion) -> Result<f64> {
    Ok((c.positive_rate(Group::Zero)? - c.positive_rate(Group::One)?).abs())
}

pub(crate) fn odds_gap(c: &GroupConfusion) -> Result<f64> {
    let fpr = (c.false_positive_rate(Group::Zero)? - c.false_positive_rate(Group::One)?).abs();
    let tpr = (c.true_positive_rate(Group::Zero)? - c.true_positive_rate(Group::One)?).abs();
    Ok(fpr.max(tpr))
}
