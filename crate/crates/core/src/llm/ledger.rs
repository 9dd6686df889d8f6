use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgentRole {
    User,
    Observer,
    Architect,
    InputWriter,
    Runner,
    Reviewer,
    ParaMaster,
}

impl fmt::Display for AgentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub role: AgentRole,
    pub purpose: String,
    pub t_in: u64,
    pub t_think: u64,
    pub t_out: u64,
    /// Some counts were estimated from whitespace tokens.
    #[serde(default)]
    pub estimated: bool,
    /// True when the call carried an image.
    #[serde(default)]
    pub multimodal: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenTotals {
    pub t_in: u64,
    pub t_think: u64,
    pub t_out: u64,
}

impl TokenTotals {
    pub fn sum(&self) -> u64 {
        self.t_in + self.t_think + self.t_out
    }

    fn add(&mut self, e: &LedgerEntry) {
        self.t_in += e.t_in;
        self.t_think += e.t_think;
        self.t_out += e.t_out;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenLedger {
    pub entries: Vec<LedgerEntry>,
}

impl TokenLedger {
    pub fn record(&mut self, entry: LedgerEntry) {
        self.entries.push(entry);
    }

    /// Zero-token marker for a knowledge-base lookup.
    pub fn record_retrieval(&mut self, role: AgentRole, purpose: impl Into<String>) {
        self.entries.push(LedgerEntry {
            role,
            purpose: purpose.into(),
            t_in: 0,
            t_think: 0,
            t_out: 0,
            estimated: false,
            multimodal: false,
        });
    }

    pub fn totals(&self) -> TokenTotals {
        let mut t = TokenTotals::default();
        for e in &self.entries {
            t.add(e);
        }
        t
    }

    pub fn totals_by_role(&self) -> BTreeMap<AgentRole, TokenTotals> {
        let mut map: BTreeMap<AgentRole, TokenTotals> = BTreeMap::new();
        for e in &self.entries {
            map.entry(e.role).or_default().add(e);
        }
        map
    }

    pub fn count_purpose(&self, purpose: &str) -> usize {
        self.entries.iter().filter(|e| e.purpose == purpose).count()
    }

    pub fn multimodal_calls(&self) -> impl Iterator<Item = &LedgerEntry> {
        self.entries.iter().filter(|e| e.multimodal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn entry(role: AgentRole, t: (u64, u64, u64)) -> LedgerEntry {
        LedgerEntry {
            role,
            purpose: "p".into(),
            t_in: t.0,
            t_think: t.1,
            t_out: t.2,
            estimated: false,
            multimodal: false,
        }
    }

    #[test]
    fn retrieval_entries_cost_nothing() {
        let mut l = TokenLedger::default();
        l.record_retrieval(AgentRole::InputWriter, "Retrieve:SolverHelp");
        assert_eq!(l.totals().sum(), 0);
        assert_eq!(l.entries.len(), 1);
    }

    proptest! {
        #[test]
        fn conservation(calls in prop::collection::vec((0u8..7, 0u64..100_000, 0u64..100_000, 0u64..100_000), 0..50)) {
            let roles = [AgentRole::User, AgentRole::Observer, AgentRole::Architect, AgentRole::InputWriter,
                AgentRole::Runner, AgentRole::Reviewer, AgentRole::ParaMaster];
            let mut l = TokenLedger::default();
            let (mut a, mut b, mut c) = (0u64, 0u64, 0u64);
            for (r, x, y, z) in &calls {
                l.record(entry(roles[*r as usize], (*x, *y, *z)));
                a += x; b += y; c += z;
            }
            let t = l.totals();
            prop_assert_eq!((t.t_in, t.t_think, t.t_out), (a, b, c));
            let by_role: u64 = l.totals_by_role().values().map(|t| t.sum()).sum();
            prop_assert_eq!(by_role, a + b + c);
        }
    }
}
