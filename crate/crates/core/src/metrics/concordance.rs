//! Harrell-type concordance index in O(n log n).

use crate::error::{Error, Result};

/// Credit given to comparable pairs whose risks are tied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieRule {
    /// Tied risks count as discordant.
    #[default]
    Strict,
    /// Tied risks count one half.
    Half,
}

impl std::str::FromStr for TieRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(TieRule::Strict),
            "half" => Ok(TieRule::Half),
            _ => Err(Error::Config(format!("unknown tie rule '{s}' (strict|half)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Concordance {
    pub c_index: f64,
    /// Number of comparable pairs `|P|`.
    pub pairs: u64,
    pub concordant: u64,
    pub tied_risk: u64,
}

/// Fenwick tree over risk ranks.
struct Fenwick(Vec<u64>);

impl Fenwick {
    fn add(&mut self, mut i: usize) {
        i += 1;
        while i < self.0.len() {
            self.0[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Count of inserted ranks `< i`.
    fn prefix(&self, mut i: usize) -> u64 {
        let mut s = 0;
        while i > 0 {
            s += self.0[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

fn check(risks: &[f64], times: &[f64], n_events: usize) -> Result<()> {
    if risks.len() != times.len() || risks.len() != n_events {
        return Err(Error::shape("concordance: risks, times and events differ in length"));
    }
    if risks.iter().chain(times).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("concordance: non-finite risk or time".into()));
    }
    Ok(())
}

/// Comparable pairs are `(i, j)` with `T_j < T_i` and `event_j`; a pair is
/// concordant when `risk_j > risk_i`.
pub fn concordance_index(risks: &[f64], times: &[f64], events: &[bool], rule: TieRule) -> Result<Concordance> {
    check(risks, times, events.len())?;
    let n = risks.len();
    // dense ranks of risk
    let mut sorted: Vec<f64> = risks.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let rank = |r: f64| sorted.partition_point(|&v| v < r);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| times[b].total_cmp(&times[a]));
    let mut tree = Fenwick(vec![0; sorted.len() + 1]);
    let (mut pairs, mut concordant, mut tied) = (0u64, 0u64, 0u64);
    let mut inserted = 0u64;
    let mut g = 0;
    while g < n {
        let t = times[order[g]];
        let mut end = g;
        while end < n && times[order[end]] == t {
            end += 1;
        }
        // the tree holds exactly the subjects with time > t
        for &j in &order[g..end] {
            if events[j] {
                let r = rank(risks[j]);
                let less = tree.prefix(r);
                let eq = tree.prefix(r + 1) - less;
                pairs += inserted;
                concordant += less;
                tied += eq;
            }
        }
        for &j in &order[g..end] {
            tree.add(rank(risks[j]));
            inserted += 1;
        }
        g = end;
    }
    if pairs == 0 {
        return Err(Error::precondition("concordance: no comparable pairs"));
    }
    let c_index = match rule {
        TieRule::Strict => concordant as f64 / pairs as f64,
        TieRule::Half => (2 * concordant + tied) as f64 / (2 * pairs) as f64,
    };
    Ok(Concordance {
        c_index,
        pairs,
        concordant,
        tied_risk: tied,
    })
}
