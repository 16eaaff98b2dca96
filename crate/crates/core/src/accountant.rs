//! Privacy budget accounting under basic sequential composition.
//!
//! Running mechanisms with costs (ε₁, δ₁), (ε₂, δ₂), ... on the same data
//! costs (Σεᵢ, Σδᵢ) in total. A [`BudgetLedger`] records every charge and
//! refuses any charge that would push either total past its cap.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::mechanisms::PrivacyBudget;

/// Relative slack allowed when comparing accumulated spend against the cap.
///
/// Charges such as `cap / steps` repeated `steps` times rarely sum to the cap
/// exactly in floating point; spend within `SLACK * max(1, cap)` of the cap is
/// treated as equal to it.
pub const SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub label: String,
    pub epsilon: f64,
    pub delta: f64,
}

/// Append-only record of privacy spent against a fixed cap.
///
/// Charging returns a new ledger; the original is never modified, so a
/// rejected charge leaves the caller's ledger exactly as it was.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLedger")]
pub struct BudgetLedger {
    cap: PrivacyBudget,
    entries: Vec<LedgerEntry>,
}

#[derive(Deserialize)]
struct RawLedger {
    cap: PrivacyBudget,
    #[serde(default)]
    entries: Vec<LedgerEntry>,
}

impl TryFrom<RawLedger> for BudgetLedger {
    type Error = Error;

    fn try_from(raw: RawLedger) -> Result<Self> {
        let mut ledger = BudgetLedger::new(raw.cap);
        for entry in raw.entries {
            ledger = ledger.charge(entry.epsilon, entry.delta, entry.label)?;
        }
        Ok(ledger)
    }
}

fn within(total: f64, cap: f64) -> bool {
    total <= cap + SLACK * cap.max(1.0)
}

impl BudgetLedger {
    pub fn new(cap: PrivacyBudget) -> Self {
        Self {
            cap,
            entries: Vec::new(),
        }
    }

    pub fn cap(&self) -> PrivacyBudget {
        self.cap
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn spent_epsilon(&self) -> f64 {
        self.entries.iter().map(|e| e.epsilon).sum()
    }

    pub fn spent_delta(&self) -> f64 {
        self.entries.iter().map(|e| e.delta).sum()
    }

    pub fn remaining_epsilon(&self) -> f64 {
        (self.cap.epsilon() - self.spent_epsilon()).max(0.0)
    }

    /// Appends a charge, or fails with `BudgetExhausted` if the new totals
    /// would exceed the cap in either coordinate.
    pub fn charge(&self, epsilon: f64, delta: f64, label: impl Into<String>) -> Result<Self> {
        ensure_non_negative("epsilon", epsilon)?;
        ensure_non_negative("delta", delta)?;
        let (spent_epsilon, spent_delta) = (self.spent_epsilon(), self.spent_delta());
        if !within(spent_epsilon + epsilon, self.cap.epsilon())
            || !within(spent_delta + delta, self.cap.delta())
        {
            return Err(Error::BudgetExhausted {
                requested_epsilon: epsilon,
                requested_delta: delta,
                spent_epsilon,
                spent_delta,
                cap_epsilon: self.cap.epsilon(),
                cap_delta: self.cap.delta(),
            });
        }
        let mut next = self.clone();
        next.entries.push(LedgerEntry {
            label: label.into(),
            epsilon,
            delta,
        });
        Ok(next)
    }

    /// Charges the cost recorded on a mechanism output.
    pub fn charge_budget(&self, budget: PrivacyBudget, label: impl Into<String>) -> Result<Self> {
        self.charge(budget.epsilon(), budget.delta(), label)
    }
}

/// Per-group privacy levels.
///
/// Groups are independent: nothing here enforces a global cap across groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, f64>", into = "BTreeMap<String, f64>")]
pub struct GroupBudgetPolicy {
    per_group: BTreeMap<String, f64>,
}

impl GroupBudgetPolicy {
    pub fn new<I, S>(groups: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut per_group = BTreeMap::new();
        for (group, epsilon) in groups {
            ensure_positive("group epsilon", epsilon)?;
            per_group.insert(group.into(), epsilon);
        }
        Ok(Self { per_group })
    }

    pub fn group_epsilon(&self, group: &str) -> Result<f64> {
        self.per_group
            .get(group)
            .copied()
            .ok_or_else(|| Error::UnknownGroup(group.to_owned()))
    }

    pub fn groups(&self) -> impl Iterator<Item = (&str, f64)> {
        self.per_group.iter().map(|(g, e)| (g.as_str(), *e))
    }
}

impl TryFrom<BTreeMap<String, f64>> for GroupBudgetPolicy {
    type Error = Error;

    fn try_from(map: BTreeMap<String, f64>) -> Result<Self> {
        Self::new(map)
    }
}

impl From<GroupBudgetPolicy> for BTreeMap<String, f64> {
    fn from(policy: GroupBudgetPolicy) -> Self {
        policy.per_group
    }
}
