//! Grammar expansion for the kernel search.
//!
//! From an expression `S` the rewrite rules produce `S + B` and `S * B` at
//! every subexpression, plus base swaps `B -> B'` at every leaf. Candidates
//! deeper than the cap are dropped and duplicates are removed up to
//! commutativity of sum and product (no distributive simplification).

use super::KernelExpr;
use crate::scalar::Scalar;

/// The three base kernels of the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaseKernel {
    Lin,
    Rbf,
    Quad,
}

impl BaseKernel {
    pub const ALL: [BaseKernel; 3] = [BaseKernel::Lin, BaseKernel::Rbf, BaseKernel::Quad];

    pub fn name(self) -> &'static str {
        match self {
            BaseKernel::Lin => "LIN",
            BaseKernel::Rbf => "RBF",
            BaseKernel::Quad => "QUAD",
        }
    }
}

/// Fresh-hyperparameter initialization for newly introduced leaves.
///
/// The defaults follow the usual heuristics: variance scale from the target
/// variance, RBF lengthscale from the median pairwise distance, unit offset.
#[derive(Debug, Clone)]
pub struct KernelInit<T> {
    pub var: T,
    pub sigma: T,
    pub offset: T,
}

impl<T: Scalar> Default for KernelInit<T> {
    fn default() -> Self {
        KernelInit {
            var: T::one(),
            sigma: T::one(),
            offset: T::one(),
        }
    }
}

impl<T: Scalar> KernelInit<T> {
    /// `var = var(y)`, `sigma` = median pairwise distance, `c = 1`.
    pub fn heuristic(x: &[Vec<T>], y: &[T]) -> Self {
        let var = variance(y).max(T::from_f64_lossy(1e-12));
        let sigma = median_pairwise_distance(x).max(T::from_f64_lossy(1e-6));
        KernelInit {
            var,
            sigma,
            offset: T::one(),
        }
    }

    pub fn leaf(&self, base: BaseKernel) -> KernelExpr<T> {
        match base {
            BaseKernel::Lin => KernelExpr::lin(self.var),
            BaseKernel::Rbf => KernelExpr::rbf(self.var, self.sigma),
            BaseKernel::Quad => KernelExpr::quad(self.var, self.offset),
        }
    }
}

fn variance<T: Scalar>(y: &[T]) -> T {
    if y.is_empty() {
        return T::zero();
    }
    let n = T::from_f64_lossy(y.len() as f64);
    let mean = y.iter().copied().sum::<T>() / n;
    y.iter()
        .map(|&v| {
            let d = v - mean;
            d * d
        })
        .sum::<T>()
        / n
}

fn median_pairwise_distance<T: Scalar>(x: &[Vec<T>]) -> T {
    let mut dists = Vec::new();
    for i in 0..x.len() {
        for j in (i + 1)..x.len() {
            let d2 = x[i]
                .iter()
                .zip(&x[j])
                .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b));
            dists.push(d2.sqrt());
        }
    }
    if dists.is_empty() {
        return T::one();
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    dists[dists.len() / 2]
}

/// Structural signature, invariant under commutativity of sum/product.
/// Hyperparameters are ignored: candidates are identified by shape.
pub(crate) fn canonical_signature<T: Scalar>(k: &KernelExpr<T>) -> String {
    match k {
        KernelExpr::Lin { .. } => "LIN".to_string(),
        KernelExpr::Rbf { .. } => "RBF".to_string(),
        KernelExpr::Quad { .. } => "QUAD".to_string(),
        KernelExpr::Sum(l, r) => {
            let (a, b) = ordered(canonical_signature(l), canonical_signature(r));
            format!("S({a},{b})")
        }
        KernelExpr::Product(l, r) => {
            let (a, b) = ordered(canonical_signature(l), canonical_signature(r));
            format!("P({a},{b})")
        }
    }
}

fn ordered(a: String, b: String) -> (String, String) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// All grammar expansions of `k` within the depth cap, deduplicated.
///
/// Existing subtrees keep their (typically fitted) hyperparameters; newly
/// introduced leaves take fresh values from `init`. The output order is
/// deterministic: sums before products before leaf swaps, each in traversal
/// and base order.
pub fn expand_grammar<T: Scalar>(
    k: &KernelExpr<T>,
    bases: &[BaseKernel],
    init: &KernelInit<T>,
    max_depth: usize,
) -> Vec<KernelExpr<T>> {
    let n_nodes = count_nodes(k);
    let mut out = Vec::new();

    // S -> S + B and S -> S * B at every subexpression
    for op_is_sum in [true, false] {
        for node in 0..n_nodes {
            for &base in bases {
                let mut counter = 0;
                let candidate = rewrite_at(k, node, &mut counter, &|sub| {
                    let fresh = init.leaf(base);
                    if op_is_sum {
                        KernelExpr::sum(sub.clone(), fresh)
                    } else {
                        KernelExpr::product(sub.clone(), fresh)
                    }
                });
                out.push(candidate);
            }
        }
    }

    // B -> B' at every leaf
    let n_leaves = count_leaves(k);
    for leaf in 0..n_leaves {
        for &base in bases {
            if leaf_base_at(k, leaf) == Some(base) {
                continue;
            }
            let mut counter = 0;
            out.push(swap_leaf_at(k, leaf, &mut counter, base, init));
        }
    }

    // depth cap, then commutative dedup keeping first occurrence
    out.retain(|c| c.depth() <= max_depth);
    let mut seen = std::collections::HashSet::new();
    out.retain(|c| seen.insert(canonical_signature(c)));
    out
}

fn count_nodes<T: Scalar>(k: &KernelExpr<T>) -> usize {
    match k {
        KernelExpr::Sum(l, r) | KernelExpr::Product(l, r) => {
            1 + count_nodes(l) + count_nodes(r)
        }
        _ => 1,
    }
}

fn count_leaves<T: Scalar>(k: &KernelExpr<T>) -> usize {
    match k {
        KernelExpr::Sum(l, r) | KernelExpr::Product(l, r) => count_leaves(l) + count_leaves(r),
        _ => 1,
    }
}

/// Rebuilds the tree with `f` applied to the node whose pre-order index is
/// `target`; `counter` threads the traversal position.
fn rewrite_at<T: Scalar>(
    k: &KernelExpr<T>,
    target: usize,
    counter: &mut usize,
    f: &impl Fn(&KernelExpr<T>) -> KernelExpr<T>,
) -> KernelExpr<T> {
    let here = *counter;
    *counter += 1;
    if here == target {
        return f(k);
    }
    match k {
        KernelExpr::Sum(l, r) => KernelExpr::sum(
            rewrite_at(l, target, counter, f),
            rewrite_at(r, target, counter, f),
        ),
        KernelExpr::Product(l, r) => KernelExpr::product(
            rewrite_at(l, target, counter, f),
            rewrite_at(r, target, counter, f),
        ),
        leaf => leaf.clone(),
    }
}

fn leaf_base_at<T: Scalar>(k: &KernelExpr<T>, target: usize) -> Option<BaseKernel> {
    fn walk<T: Scalar>(k: &KernelExpr<T>, target: usize, counter: &mut usize) -> Option<BaseKernel> {
        match k {
            KernelExpr::Sum(l, r) | KernelExpr::Product(l, r) => {
                walk(l, target, counter).or_else(|| walk(r, target, counter))
            }
            leaf => {
                let here = *counter;
                *counter += 1;
                if here == target {
                    Some(match leaf {
                        KernelExpr::Lin { .. } => BaseKernel::Lin,
                        KernelExpr::Rbf { .. } => BaseKernel::Rbf,
                        _ => BaseKernel::Quad,
                    })
                } else {
                    None
                }
            }
        }
    }
    let mut counter = 0;
    walk(k, target, &mut counter)
}

fn swap_leaf_at<T: Scalar>(
    k: &KernelExpr<T>,
    target: usize,
    counter: &mut usize,
    base: BaseKernel,
    init: &KernelInit<T>,
) -> KernelExpr<T> {
    match k {
        KernelExpr::Sum(l, r) => {
            let left = swap_leaf_at(l, target, counter, base, init);
            let right = swap_leaf_at(r, target, counter, base, init);
            KernelExpr::sum(left, right)
        }
        KernelExpr::Product(l, r) => {
            let left = swap_leaf_at(l, target, counter, base, init);
            let right = swap_leaf_at(r, target, counter, base, init);
            KernelExpr::product(left, right)
        }
        leaf => {
            let here = *counter;
            *counter += 1;
            if here == target {
                init.leaf(base)
            } else {
                leaf.clone()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sigs(cands: &[KernelExpr<f64>]) -> Vec<String> {
        cands.iter().map(canonical_signature).collect()
    }

    #[test]
    fn single_lin_expands_to_eight_candidates() {
        // brute-force expected set, frozen from the rewrite rules by hand
        let k = KernelExpr::lin(1.0);
        let cands = expand_grammar(&k, &BaseKernel::ALL, &KernelInit::default(), 3);
        let got = sigs(&cands);
        let expected = [
            "S(LIN,LIN)",
            "S(LIN,RBF)",
            "S(LIN,QUAD)",
            "P(LIN,LIN)",
            "P(LIN,RBF)",
            "P(LIN,QUAD)",
            "RBF",
            "QUAD",
        ];
        assert_eq!(got.len(), 8);
        for e in expected {
            assert!(got.iter().any(|s| s == e), "missing candidate {e}");
        }
    }

    #[test]
    fn depth_capped_tree_only_swaps_leaves() {
        let k = KernelExpr::sum(KernelExpr::lin(1.0), KernelExpr::rbf(1.0, 1.0));
        let cands = expand_grammar(&k, &BaseKernel::ALL, &KernelInit::default(), 2);
        // every candidate keeps depth <= 2, so no sums/products were added on top
        assert!(cands.iter().all(|c| c.depth() <= 2));
        // leaf swaps: LIN->RBF, LIN->QUAD, RBF->LIN, RBF->QUAD; S(RBF,RBF),
        // S(LIN,QUAD), S(LIN,LIN) and S(QUAD,RBF) are distinct structures
        let got = sigs(&cands);
        assert!(got.contains(&"S(QUAD,RBF)".to_string()));
        assert!(got.contains(&"S(LIN,QUAD)".to_string()));
        assert!(!got.iter().any(|s| s.starts_with("S(S") || s.starts_with("P(")));
    }

    #[test]
    fn commutative_duplicates_are_merged() {
        // SUM(LIN, RBF) and SUM(RBF, LIN) share a signature
        let a = KernelExpr::sum(KernelExpr::lin(1.0), KernelExpr::rbf(1.0, 1.0));
        let b = KernelExpr::sum(KernelExpr::rbf(1.0, 1.0), KernelExpr::lin(1.0));
        assert_eq!(canonical_signature(&a), canonical_signature(&b));
        // and a nested product keeps associativity distinct
        let c = KernelExpr::product(a.clone(), KernelExpr::quad(1.0, 1.0));
        let d = KernelExpr::product(KernelExpr::quad(1.0, 1.0), a);
        assert_eq!(canonical_signature(&c), canonical_signature(&d));
    }

    #[test]
    fn expansion_count_matches_bruteforce_enumeration() {
        // independent enumeration: apply each rule explicitly and dedup
        let k = KernelExpr::sum(KernelExpr::lin(1.0), KernelExpr::rbf(1.0, 1.0));
        let init = KernelInit::default();
        let max_depth = 3;

        let mut expected: Vec<KernelExpr<f64>> = Vec::new();
        // nodes in pre-order: root, left leaf, right leaf
        let subtrees: Vec<Box<dyn Fn(KernelExpr<f64>) -> KernelExpr<f64>>> = vec![
            Box::new(|b| KernelExpr::sum(
                KernelExpr::sum(KernelExpr::lin(1.0), KernelExpr::rbf(1.0, 1.0)),
                b,
            )),
            Box::new(|b| KernelExpr::sum(
                KernelExpr::sum(KernelExpr::lin(1.0), b),
                KernelExpr::rbf(1.0, 1.0),
            )),
            Box::new(|b| KernelExpr::sum(
                KernelExpr::lin(1.0),
                KernelExpr::sum(KernelExpr::rbf(1.0, 1.0), b),
            )),
            Box::new(|b| KernelExpr::product(
                KernelExpr::sum(KernelExpr::lin(1.0), KernelExpr::rbf(1.0, 1.0)),
                b,
            )),
            Box::new(|b| KernelExpr::sum(
                KernelExpr::product(KernelExpr::lin(1.0), b),
                KernelExpr::rbf(1.0, 1.0),
            )),
            Box::new(|b| KernelExpr::sum(
                KernelExpr::lin(1.0),
                KernelExpr::product(KernelExpr::rbf(1.0, 1.0), b),
            )),
        ];
        for f in &subtrees {
            for base in BaseKernel::ALL {
                expected.push(f(init.leaf(base)));
            }
        }
        // leaf swaps
        for (leaf, skip) in [(0usize, BaseKernel::Lin), (1, BaseKernel::Rbf)] {
            for base in BaseKernel::ALL {
                if base == skip {
                    continue;
                }
                let l = if leaf == 0 {
                    init.leaf(base)
                } else {
                    KernelExpr::lin(1.0)
                };
                let r = if leaf == 1 {
                    init.leaf(base)
                } else {
                    KernelExpr::rbf(1.0, 1.0)
                };
                expected.push(KernelExpr::sum(l, r));
            }
        }
        expected.retain(|c| c.depth() <= max_depth);
        let mut seen = std::collections::HashSet::new();
        expected.retain(|c| seen.insert(canonical_signature(c)));

        let got = expand_grammar(&k, &BaseKernel::ALL, &init, max_depth);
        let mut got_sigs = sigs(&got);
        let mut expected_sigs: Vec<String> = expected.iter().map(canonical_signature).collect();
        got_sigs.sort();
        expected_sigs.sort();
        assert_eq!(got_sigs, expected_sigs);
    }

    #[test]
    fn heuristic_init_uses_variance_and_median_distance() {
        let x = vec![vec![0.0, 0.0], vec![3.0, 4.0], vec![0.0, 0.0]];
        let y = vec![1.0, 3.0, 5.0];
        let init = KernelInit::heuristic(&x, &y);
        // var(y) population = 8/3
        assert!((init.var - 8.0 / 3.0).abs() < 1e-12);
        // pairwise distances: 5, 0, 5 -> sorted [0,5,5] -> median 5
        assert!((init.sigma - 5.0).abs() < 1e-12);
        assert_eq!(init.offset, 1.0);
    }
}
