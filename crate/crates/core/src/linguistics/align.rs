//! Minimal-cost monotone alignment between token sequences.
//!
//! The DP table is filled over suffixes and the script is read forwards, so
//! the first operation in the preference order that stays optimal wins at
//! every cell. With edits ranked ahead of matches this places every edit as
//! early as possible.

use serde::{Deserialize, Serialize};

use super::{is_silent, GraphemePhonemeCorpus, SILENT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditOp {
    Match,
    Substitute,
    /// A token of the source sequence has no counterpart in the target.
    Delete,
    /// A token of the target sequence has no counterpart in the source.
    Insert,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditStep {
    pub op: EditOp,
    pub from: Option<usize>,
    pub to: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Costs {
    pub substitute: u32,
    pub indel: u32,
    /// Operation order tried at each cell; must list all four ops.
    pub order: [EditOp; 4],
}

impl Costs {
    /// Unit costs, substitutions first, every edit as far left as possible.
    pub const UNIT: Costs = Costs {
        substitute: 1,
        indel: 1,
        order: [EditOp::Substitute, EditOp::Delete, EditOp::Insert, EditOp::Match],
    };

    /// Letter-level costs used to project a target analysis onto an attempt.
    /// Substitution costs more than one indel so an extra or missing letter
    /// is not smeared across neighbours; an extra or missing letter next to
    /// an equal one is placed after it (`ss` for `s` is `s` + extra `s`).
    pub const LETTERS: Costs = Costs {
        substitute: 3,
        indel: 2,
        order: [EditOp::Substitute, EditOp::Match, EditOp::Delete, EditOp::Insert],
    };
}

/// Edit script turning `from` into `to`, with `same` deciding which pairs match.
pub fn edit_script_by<A, B>(
    from: &[A],
    to: &[B],
    same: impl Fn(&A, &B) -> bool,
    costs: Costs,
) -> (u32, Vec<EditStep>) {
    let (n, m) = (from.len(), to.len());
    let w = m + 1;
    let mut d = vec![0u32; (n + 1) * w];
    for i in (0..=n).rev() {
        for j in (0..=m).rev() {
            let v = if i == n {
                (m - j) as u32 * costs.indel
            } else if j == m {
                (n - i) as u32 * costs.indel
            } else {
                let diag = d[(i + 1) * w + j + 1]
                    + if same(&from[i], &to[j]) { 0 } else { costs.substitute };
                diag.min(d[(i + 1) * w + j] + costs.indel)
                    .min(d[i * w + j + 1] + costs.indel)
            };
            d[i * w + j] = v;
        }
    }

    let mut steps = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (0, 0);
    while i < n || j < m {
        let here = d[i * w + j];
        let mut chosen = None;
        for op in costs.order {
            let ok = match op {
                EditOp::Match => i < n && j < m && same(&from[i], &to[j]) && here == d[(i + 1) * w + j + 1],
                EditOp::Substitute => {
                    i < n && j < m && !same(&from[i], &to[j]) && here == d[(i + 1) * w + j + 1] + costs.substitute
                }
                EditOp::Delete => i < n && here == d[(i + 1) * w + j] + costs.indel,
                EditOp::Insert => j < m && here == d[i * w + j + 1] + costs.indel,
            };
            if ok {
                chosen = Some(op);
                break;
            }
        }
        let op = chosen.expect("some operation is always optimal");
        let step = match op {
            EditOp::Match | EditOp::Substitute => {
                i += 1;
                j += 1;
                EditStep { op, from: Some(i - 1), to: Some(j - 1) }
            }
            EditOp::Delete => {
                i += 1;
                EditStep { op, from: Some(i - 1), to: None }
            }
            EditOp::Insert => {
                j += 1;
                EditStep { op, from: None, to: Some(j - 1) }
            }
        };
        steps.push(step);
    }
    (d[0], steps)
}

pub fn edit_script<T: PartialEq>(from: &[T], to: &[T], costs: Costs) -> (u32, Vec<EditStep>) {
    edit_script_by(from, to, |a, b| a == b, costs)
}

/// Unit-cost grapheme diff turning `attempt` into `target`.
pub fn diff_graphemes(attempt: &[String], target: &[String]) -> (u32, Vec<EditStep>) {
    edit_script(attempt, target, Costs::UNIT)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignedPair {
    pub grapheme: String,
    pub phoneme: String,
    pub op: EditOp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alignment {
    pub pairs: Vec<AlignedPair>,
    pub cost: u32,
}

impl Alignment {
    /// Grapheme side with gap markers dropped.
    pub fn spelled(&self) -> String {
        self.pairs
            .iter()
            .filter(|p| p.grapheme != SILENT)
            .map(|p| p.grapheme.as_str())
            .collect()
    }
}

/// Aligns a word's graphemes with its phonemes. A pair matches when the
/// corpus attests the grapheme for the phoneme or the phoneme is silent.
pub fn align(graphemes: &[String], phonemes: &[String], corpus: &GraphemePhonemeCorpus) -> Alignment {
    let same = |g: &String, p: &String| is_silent(p) || corpus.attests(p, g);
    let (cost, steps) = edit_script_by(graphemes, phonemes, same, Costs::UNIT);
    let pairs = steps
        .into_iter()
        .map(|s| AlignedPair {
            grapheme: s.from.map_or_else(|| SILENT.to_string(), |i| graphemes[i].clone()),
            phoneme: s.to.map_or_else(|| SILENT.to_string(), |j| phonemes[j].clone()),
            op: s.op,
        })
        .collect();
    Alignment { pairs, cost }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    /// Exhaustive search over every edit script; exponential, small inputs only.
    fn brute(a: &[String], b: &[String], sub: u32, indel: u32) -> u32 {
        match (a.split_first(), b.split_first()) {
            (None, None) => 0,
            (Some(_), None) => a.len() as u32 * indel,
            (None, Some(_)) => b.len() as u32 * indel,
            (Some((x, ar)), Some((y, br))) => {
                let diag = brute(ar, br, sub, indel) + if x == y { 0 } else { sub };
                diag.min(brute(ar, b, sub, indel) + indel)
                    .min(brute(a, br, sub, indel) + indel)
            }
        }
    }

    fn apply(from: &[String], to: &[String], steps: &[EditStep]) -> Vec<String> {
        steps
            .iter()
            .filter_map(|s| match s.op {
                EditOp::Delete => None,
                EditOp::Match => Some(from[s.from.unwrap()].clone()),
                EditOp::Substitute | EditOp::Insert => Some(to[s.to.unwrap()].clone()),
            })
            .collect()
    }

    #[test]
    fn single_team_substitution() {
        let (cost, steps) = diff_graphemes(&v(&["r", "ee", "ch"]), &v(&["r", "ea", "ch"]));
        assert_eq!(cost, 1);
        let edits: Vec<_> = steps.iter().filter(|s| s.op != EditOp::Match).collect();
        assert_eq!(edits.len(), 1);
        assert_eq!(edits[0].op, EditOp::Substitute);
        assert_eq!(edits[0].to, Some(1));
    }

    #[test]
    fn missing_silent_g_is_in_the_diff() {
        let attempt = v(&["s", "i", "ne"]);
        let target = v(&["s", "i", "g", "n"]);
        let (cost, steps) = diff_graphemes(&attempt, &target);
        assert_eq!(cost, brute(&attempt, &target, 1, 1));
        assert!(steps
            .iter()
            .any(|s| s.op != EditOp::Match && s.to.map(|j| target[j].as_str()) == Some("g")));
    }

    #[test]
    fn edits_are_placed_leftmost() {
        let (_, steps) = edit_script(&v(&["a", "a"]), &v(&["a"]), Costs::UNIT);
        assert_eq!(steps[0].op, EditOp::Delete);
        let (_, steps) = edit_script(&v(&["a", "a"]), &v(&["a"]), Costs::LETTERS);
        assert_eq!(steps[0].op, EditOp::Match);
        assert_eq!(steps[1].op, EditOp::Delete);
        let (_, steps) = edit_script(&v(&["s"]), &v(&["s", "s"]), Costs::LETTERS);
        assert_eq!(steps[0].op, EditOp::Match);
        assert_eq!(steps[1].op, EditOp::Insert);
    }

    #[test]
    fn prefers_substitution_over_indel_pair() {
        let (cost, steps) = diff_graphemes(&v(&["b", "o", "g"]), &v(&["d", "o", "g"]));
        assert_eq!(cost, 1);
        assert_eq!(steps[0].op, EditOp::Substitute);
    }

    #[test]
    fn empty_sides() {
        let (c, s) = diff_graphemes(&[], &v(&["a", "b"]));
        assert_eq!(c, 2);
        assert!(s.iter().all(|x| x.op == EditOp::Insert));
    }

    proptest::proptest! {
        #[test]
        fn cost_matches_exhaustive_oracle(
            a in proptest::collection::vec("[abc]", 0..6),
            b in proptest::collection::vec("[abc]", 0..6),
        ) {
            for (costs, sub, indel) in [(Costs::UNIT, 1, 1), (Costs::LETTERS, 3, 2)] {
                let (cost, steps) = edit_script(&a, &b, costs);
                proptest::prop_assert_eq!(cost, brute(&a, &b, sub, indel));
                proptest::prop_assert_eq!(apply(&a, &b, &steps), b.clone());
                let counted: u32 = steps.iter().map(|s| match s.op {
                    EditOp::Match => 0,
                    EditOp::Substitute => sub,
                    _ => indel,
                }).sum();
                proptest::prop_assert_eq!(counted, cost);
            }
        }

        #[test]
        fn cost_is_symmetric(
            a in proptest::collection::vec("[ab]{1,2}", 0..6),
            b in proptest::collection::vec("[ab]{1,2}", 0..6),
        ) {
            proptest::prop_assert_eq!(diff_graphemes(&a, &b).0, diff_graphemes(&b, &a).0);
        }
    }
}
