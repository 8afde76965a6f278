//! Nearest-neighbor sets per token and cross-space overlap stability.
//!
//! Neighbor search is exact brute force over pre-normalized vectors (dot
//! product = cosine); stability is defined on exact neighbor sets, so no
//! approximate index is used.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sgns::EmbeddingSpace;

/// Top-n cosine neighbors of one query token, scores descending.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborList {
    pub token: usize,
    /// (neighbor index, cosine score), scores non-increasing, ties broken by
    /// ascending index. Never contains the query token.
    pub neighbors: Vec<(usize, f64)>,
}

/// Stability of one token across k spaces.
#[derive(Debug, Clone)]
pub struct StabilityRecord {
    pub token: String,
    pub index: usize,
    /// |intersection of the k neighbor sets| / n.
    pub stability: f64,
    pub intersection_size: usize,
    pub n: usize,
}

/// Row-normalized input vectors of a space, ready for cosine by dot product.
pub struct NormalizedSpace {
    pub dim: usize,
    pub rows: Vec<f64>,
    pub fingerprint: String,
    pub tokens: Vec<String>,
}

impl NormalizedSpace {
    pub fn from_space(space: &EmbeddingSpace) -> NormalizedSpace {
        let dim = space.dim;
        let v = space.vocab_size();
        let mut rows = vec![0.0; v * dim];
        for i in 0..v {
            let r = space.input_row(i);
            let norm: f64 = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            let inv = if norm > 0.0 { 1.0 / norm } else { 0.0 };
            for d in 0..dim {
                rows[i * dim + d] = r[d] * inv;
            }
        }
        NormalizedSpace {
            dim,
            rows,
            fingerprint: space.vocab_fingerprint.clone(),
            tokens: space.tokens.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }
}

/// Exact top-n cosine neighbors of `token`, optionally restricted to
/// candidates where `candidates[i]` is true.
pub fn nearest_neighbors(
    space: &NormalizedSpace,
    token: usize,
    n: usize,
    candidates: Option<&[bool]>,
) -> Result<NeighborList> {
    assert!(n >= 1);
    if token >= space.len() {
        return Err(Error::UnknownToken(format!("index {token}")));
    }
    let q = space.row(token);
    let mut scored: Vec<(usize, f64)> = (0..space.len())
        .filter(|&i| i != token)
        .filter(|&i| candidates.map_or(true, |c| c[i]))
        .map(|i| {
            let dot: f64 = q.iter().zip(space.row(i)).map(|(a, b)| a * b).sum();
            (i, dot)
        })
        .collect();
    // Descending score, ties by ascending index.
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored.truncate(n);
    Ok(NeighborList { token, neighbors: scored })
}

fn check_comparable(spaces: &[&NormalizedSpace]) -> Result<()> {
    if spaces.len() < 2 {
        return Err(Error::IncomparableSpaces {
            a: "need at least 2 spaces".into(),
            b: format!("got {}", spaces.len()),
        });
    }
    let first = &spaces[0].fingerprint;
    for s in &spaces[1..] {
        if &s.fingerprint != first {
            return Err(Error::IncomparableSpaces {
                a: first.clone(),
                b: s.fingerprint.clone(),
            });
        }
    }
    Ok(())
}

/// Stability of one token: |∩ of per-space neighbor SETS| / n.
pub fn stability(
    token: usize,
    spaces: &[&NormalizedSpace],
    n: usize,
    candidates: Option<&[bool]>,
) -> Result<StabilityRecord> {
    check_comparable(spaces)?;
    let mut intersection: Option<std::collections::HashSet<usize>> = None;
    for s in spaces {
        let nn = nearest_neighbors(s, token, n, candidates)?;
        let set: std::collections::HashSet<usize> =
            nn.neighbors.iter().map(|&(i, _)| i).collect();
        intersection = Some(match intersection {
            None => set,
            Some(acc) => acc.intersection(&set).copied().collect(),
        });
    }
    let size = intersection.map_or(0, |s| s.len());
    Ok(StabilityRecord {
        token: spaces[0].tokens[token].clone(),
        index: token,
        stability: size as f64 / n as f64,
        intersection_size: size,
        n,
    })
}

/// Stability for every token selected by `filter`, ordered by index.
/// Neighbor computation is parallel over query tokens.
pub fn stability_report(
    spaces: &[&NormalizedSpace],
    filter: impl Fn(usize) -> bool + Sync,
    n: usize,
    candidates: Option<&[bool]>,
) -> Result<Vec<StabilityRecord>> {
    check_comparable(spaces)?;
    let selected: Vec<usize> = (0..spaces[0].len()).filter(|&i| filter(i)).collect();
    selected
        .par_iter()
        .map(|&i| stability(i, spaces, n, candidates))
        .collect::<Result<Vec<_>>>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;
    use crate::sgns::{init_embeddings, EmbeddingSpace};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn space_from_rows(rows: Vec<Vec<f64>>, fingerprint: &str) -> NormalizedSpace {
        let dim = rows[0].len();
        let tokens: Vec<String> = (0..rows.len()).map(|i| format!("t{i}")).collect();
        let space = EmbeddingSpace {
            dim,
            tokens,
            input: rows.into_iter().flatten().collect(),
            output: Vec::new(),
            vocab_fingerprint: fingerprint.to_string(),
            seed: 0,
            hyperparams: Default::default(),
            deterministic: true,
        };
        NormalizedSpace::from_space(&space)
    }

    #[test]
    fn hand_geometry_neighbor() {
        let s = space_from_rows(
            vec![vec![1.0, 0.0], vec![0.9, 0.1], vec![0.0, 1.0]],
            "f",
        );
        let nn = nearest_neighbors(&s, 0, 1, None).unwrap();
        assert_eq!(nn.neighbors[0].0, 1);
    }

    #[test]
    fn n_larger_than_vocab_returns_all_others() {
        let s = space_from_rows(
            vec![vec![1.0, 0.0], vec![0.9, 0.1], vec![0.0, 1.0]],
            "f",
        );
        let nn = nearest_neighbors(&s, 0, 10, None).unwrap();
        assert_eq!(nn.neighbors.len(), 2);
        assert_eq!(nn.neighbors[0].0, 1);
        assert_eq!(nn.neighbors[1].0, 2);
    }

    #[test]
    fn self_excluded_and_scores_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> =
            (0..30).map(|_| (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let s = space_from_rows(rows, "f");
        for q in 0..30 {
            let nn = nearest_neighbors(&s, q, 10, None).unwrap();
            assert!(nn.neighbors.iter().all(|&(i, _)| i != q));
            for w in nn.neighbors.windows(2) {
                assert!(w[0].1 >= w[1].1);
            }
        }
    }

    #[test]
    fn matches_brute_force_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rows: Vec<Vec<f64>> =
            (0..50).map(|_| (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let s = space_from_rows(rows.clone(), "f");
        for q in 0..50 {
            let nn = nearest_neighbors(&s, q, 10, None).unwrap();
            // Independent quadratic oracle on the raw rows.
            let cos = |a: &[f64], b: &[f64]| {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                dot / (na * nb)
            };
            let mut oracle: Vec<(usize, f64)> = (0..50)
                .filter(|&i| i != q)
                .map(|i| (i, cos(&rows[q], &rows[i])))
                .collect();
            oracle.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            let expect: Vec<usize> = oracle.iter().take(10).map(|&(i, _)| i).collect();
            let got: Vec<usize> = nn.neighbors.iter().map(|&(i, _)| i).collect();
            assert_eq!(got, expect);
        }
    }

    #[test]
    fn identical_spaces_give_stability_one() {
        let vocab = {
            let stream = vec![(0..12).map(|i| format!("w{i}")).collect::<Vec<_>>(); 3];
            Vocabulary::build(stream, 1, &HashSet::new()).unwrap().0
        };
        let sp = init_embeddings(&vocab, 6, 2);
        let n1 = NormalizedSpace::from_space(&sp);
        let n2 = NormalizedSpace::from_space(&sp);
        let n3 = NormalizedSpace::from_space(&sp);
        let report = stability_report(&[&n1, &n2, &n3], |_| true, 5, None).unwrap();
        assert_eq!(report.len(), 12);
        assert!(report.iter().all(|r| r.stability == 1.0));
    }

    #[test]
    fn disjoint_neighbor_sets_give_zero() {
        // 2-d spaces where token 0's neighbors differ completely: in space A
        // tokens 1,2 point along x with token 0; in space B tokens 3,4 do.
        let a = space_from_rows(
            vec![
                vec![1.0, 0.0],
                vec![1.0, 0.1],
                vec![1.0, -0.1],
                vec![-1.0, 1.0],
                vec![-1.0, -1.0],
            ],
            "f",
        );
        let b = space_from_rows(
            vec![
                vec![1.0, 0.0],
                vec![-1.0, 1.0],
                vec![-1.0, -1.0],
                vec![1.0, 0.1],
                vec![1.0, -0.1],
            ],
            "f",
        );
        let r = stability(0, &[&a, &b], 2, None).unwrap();
        assert_eq!(r.stability, 0.0);
    }

    #[test]
    fn partial_overlap_fraction() {
        // 23 tokens; token 0 queries n=10. Each space boosts tokens 1-4 plus
        // six space-specific tokens toward the query axis, so exactly 4 of
        // the 10 neighbors are shared by all three spaces.
        let base = |boosted: &[usize]| {
            let mut rows = vec![vec![0.0, 1.0]; 23];
            rows[0] = vec![1.0, 0.0];
            for (rank, &i) in boosted.iter().enumerate() {
                rows[i] = vec![1.0, 0.05 * (rank as f64 + 1.0)];
            }
            rows
        };
        let p = space_from_rows(base(&[1, 2, 3, 4, 5, 6, 7, 8, 9, 10]), "f");
        let q = space_from_rows(base(&[1, 2, 3, 4, 11, 12, 13, 14, 15, 16]), "f");
        let r = space_from_rows(base(&[1, 2, 3, 4, 17, 18, 19, 20, 21, 22]), "f");
        let rec = stability(0, &[&p, &q, &r], 10, None).unwrap();
        assert_eq!(rec.intersection_size, 4);
        assert!((rec.stability - 0.4).abs() < 1e-15);
        // Oracle: brute-force intersection of the three top-10 sets.
        let sets: Vec<HashSet<usize>> = [&p, &q, &r]
            .iter()
            .map(|s| {
                nearest_neighbors(s, 0, 10, None)
                    .unwrap()
                    .neighbors
                    .iter()
                    .map(|&(i, _)| i)
                    .collect()
            })
            .collect();
        let inter: HashSet<usize> =
            sets[0].iter().filter(|i| sets[1].contains(i) && sets[2].contains(i)).copied().collect();
        assert_eq!(rec.intersection_size, inter.len());
        assert!((rec.stability - inter.len() as f64 / 10.0).abs() < 1e-15);
    }

    #[test]
    fn fingerprint_mismatch_errors() {
        let a = space_from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]], "fa");
        let b = space_from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]], "fb");
        assert!(matches!(
            stability(0, &[&a, &b], 1, None),
            Err(Error::IncomparableSpaces { .. })
        ));
    }

    #[test]
    fn reordering_spaces_is_invariant_and_superset_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mk = |rng: &mut ChaCha8Rng| {
            let rows: Vec<Vec<f64>> =
                (0..20).map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            space_from_rows(rows, "f")
        };
        let (a, b, c) = (mk(&mut rng), mk(&mut rng), mk(&mut rng));
        for tok in 0..20 {
            let abc = stability(tok, &[&a, &b, &c], 5, None).unwrap().stability;
            let cab = stability(tok, &[&c, &a, &b], 5, None).unwrap().stability;
            assert_eq!(abc, cab);
            let ab = stability(tok, &[&a, &b], 5, None).unwrap().stability;
            assert!(abc <= ab);
        }
    }

    #[test]
    fn candidate_restriction_excludes_masked_tokens() {
        let s = space_from_rows(
            vec![vec![1.0, 0.0], vec![0.99, 0.1], vec![0.9, 0.2], vec![0.0, 1.0]],
            "f",
        );
        let mask = vec![true, false, true, true];
        let nn = nearest_neighbors(&s, 0, 2, Some(&mask)).unwrap();
        let got: Vec<usize> = nn.neighbors.iter().map(|&(i, _)| i).collect();
        assert_eq!(got, vec![2, 3]);
    }
}
