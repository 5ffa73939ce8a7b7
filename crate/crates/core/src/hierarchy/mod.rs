//! Geographic hierarchy, summing matrix and reconciliation mappings.

mod methods;

pub use methods::{hierarchical_forecasts, HierarchicalMethod, HierarchicalOutput};

use std::collections::BTreeSet;
use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;

/// Aggregates first (root, then regions), then bottom-level nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Hierarchy {
    nodes: Vec<String>,
    parents: Vec<Option<usize>>,
    m: usize,
    s: DMatrix<f64>,
}

impl Hierarchy {
    /// Builds a two-level tree: `root` over the given regions, each region
    /// over its member leaves. A region covering every leaf duplicates the
    /// root row and is dropped.
    pub fn new(root: &str, regions: &[(String, Vec<String>)]) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut names = BTreeSet::from([root.to_string()]);
        for (region, members) in regions {
            if members.is_empty() {
                return Err(Error::MalformedTree(format!("region `{region}` has no members")));
            }
            if !names.insert(region.clone()) {
                return Err(Error::MalformedTree(format!("duplicate node `{region}`")));
            }
        }
        let leaves: Vec<String> = regions.iter().flat_map(|(_, m)| m.iter().cloned()).collect();
        for leaf in &leaves {
            if names.contains(leaf) || !seen.insert(leaf.clone()) {
                return Err(Error::MalformedTree(format!("`{leaf}` appears more than once")));
            }
        }
        let m = leaves.len();
        if m == 0 {
            return Err(Error::MalformedTree("no bottom-level nodes".into()));
        }

        let mut nodes = vec![root.to_string()];
        let mut parents = vec![None];
        let mut rows: Vec<Vec<usize>> = vec![(0..m).collect()];
        let mut leaf_parent = vec![0usize; m];
        let mut offset = 0;
        for (region, members) in regions {
            let span: Vec<usize> = (offset..offset + members.len()).collect();
            offset += members.len();
            if span.len() == m {
                continue;
            }
            let idx = nodes.len();
            nodes.push(region.clone());
            parents.push(Some(0));
            for &j in &span {
                leaf_parent[j] = idx;
            }
            rows.push(span);
        }
        let k = nodes.len();
        for (j, leaf) in leaves.into_iter().enumerate() {
            nodes.push(leaf);
            parents.push(Some(leaf_parent[j]));
            rows.push(vec![j]);
        }
        let n = nodes.len();
        let mut s = DMatrix::zeros(n, m);
        for (i, cols) in rows.iter().enumerate() {
            for &j in cols {
                s[(i, j)] = 1.0;
            }
        }
        debug_assert_eq!(n - k, m);
        Ok(Self { nodes, parents, m, s })
    }

    /// Total number of nodes.
    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    /// Number of bottom-level nodes.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn leaves(&self) -> &[String] {
        &self.nodes[self.n() - self.m..]
    }

    pub fn aggregates(&self) -> &[String] {
        &self.nodes[..self.n() - self.m]
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parents[node]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == name)
    }

    pub fn summing_matrix(&self) -> &DMatrix<f64> {
        &self.s
    }

    /// Bottom-level indices aggregated by `node`.
    pub fn members(&self, node: usize) -> Vec<usize> {
        (0..self.m).filter(|&j| self.s[(node, j)] == 1.0).collect()
    }

    /// `S * bottom` for an `m x h` matrix of bottom-level paths.
    pub fn aggregate(&self, bottom: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if bottom.nrows() != self.m {
            return Err(Error::ShapeMismatch(format!("{} bottom rows for {} leaves", bottom.nrows(), self.m)));
        }
        Ok(&self.s * bottom)
    }

    /// Writes S with a node-name column and one column per leaf.
    pub fn write_summing_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["node".to_string()];
        header.extend(self.leaves().iter().cloned());
        w.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
        for (i, node) in self.nodes.iter().enumerate() {
            let mut rec = vec![node.clone()];
            rec.extend((0..self.m).map(|j| format!("{}", self.s[(i, j)] as u8)));
            w.write_record(&rec).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Map from summed node values to a coherent bottom level.
#[derive(Debug, Clone, PartialEq)]
pub struct GMatrix(pub DMatrix<f64>);

/// Top-down G: the root forecast is split by `proportions`.
pub fn top_down_g(hierarchy: &Hierarchy, proportions: &[f64]) -> Result<GMatrix> {
    check_proportions(proportions, hierarchy.m())?;
    let mut g = DMatrix::zeros(hierarchy.m(), hierarchy.n());
    for (i, p) in proportions.iter().enumerate() {
        g[(i, 0)] = *p;
    }
    Ok(GMatrix(g))
}

fn check_proportions(p: &[f64], m: usize) -> Result<()> {
    if p.len() != m {
        return Err(Error::ShapeMismatch(format!("{} proportions for {m} leaves", p.len())));
    }
    let sum: f64 = p.iter().sum();
    if p.iter().any(|v| !(*v >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
        return Err(Error::BadProportions(format!("must be non-negative and sum to 1 (sum {sum})")));
    }
    Ok(())
}

/// `G = (S' W^-1 S)^-1 S' W^-1`.
pub fn mint_g(hierarchy: &Hierarchy, w: &DMatrix<f64>) -> Result<GMatrix> {
    let n = hierarchy.n();
    if w.nrows() != n || w.ncols() != n {
        return Err(Error::ShapeMismatch(format!("W is {}x{}, expected {n}x{n}", w.nrows(), w.ncols())));
    }
    let s = hierarchy.summing_matrix();
    let winv_s = linalg::solve(w, s).ok_or(Error::SingularW)?;
    let a = s.transpose() * &winv_s;
    // W is symmetric, so S' W^-1 = (W^-1 S)'.
    let g = linalg::solve(&a, &winv_s.transpose()).ok_or(Error::SingularW)?;
    Ok(GMatrix(g))
}

/// MinT with the off-diagonal covariances dropped.
pub fn wls_g(hierarchy: &Hierarchy, w: &DMatrix<f64>) -> Result<GMatrix> {
    if w.nrows() != w.ncols() {
        return Err(Error::ShapeMismatch("W is not square".into()));
    }
    let diag = DMatrix::from_diagonal(&w.diagonal());
    mint_g(hierarchy, &diag)
}

/// `S G yhat` for an `n x h` matrix of base forecasts.
pub fn reconcile(hierarchy: &Hierarchy, g: &GMatrix, base: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if base.nrows() != hierarchy.n() || g.0.nrows() != hierarchy.m() || g.0.ncols() != hierarchy.n() {
        return Err(Error::ShapeMismatch("base forecasts or G do not match the hierarchy".into()));
    }
    Ok(hierarchy.summing_matrix() * (&g.0 * base))
}

/// Top-down reconciliation with a separate proportion vector per horizon
/// step. `top` is the root path; returns the full `n x h` coherent matrix.
pub fn top_down(hierarchy: &Hierarchy, top: &[f64], proportions: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if top.len() != proportions.len() {
        return Err(Error::ShapeMismatch("one proportion vector per horizon step".into()));
    }
    let mut bottom = DMatrix::zeros(hierarchy.m(), top.len());
    for (k, (t, p)) in top.iter().zip(proportions).enumerate() {
        check_proportions(p, hierarchy.m())?;
        for (i, pi) in p.iter().enumerate() {
            bottom[(i, k)] = pi * t;
        }
    }
    hierarchy.aggregate(&bottom)
}

fn normalise(values: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = values.iter().map(|v| v.max(0.0)).sum();
    if !(total > 0.0) {
        return Err(Error::BadProportions("shares of a non-positive total".into()));
    }
    let mut p: Vec<f64> = values.iter().map(|v| v.max(0.0) / total).collect();
    // Absorb rounding so the sum is 1 to machine precision.
    let drift: f64 = 1.0 - p.iter().sum::<f64>();
    if let Some(max) = p.iter_mut().max_by(|a, b| a.total_cmp(b)) {
        *max += drift;
    }
    Ok(p)
}

/// Per-step shares of individual leaf forecasts (`m x h`).
pub fn forecast_proportions(leaf_forecasts: &DMatrix<f64>) -> Result<Vec<Vec<f64>>> {
    (0..leaf_forecasts.ncols())
        .map(|k| normalise(leaf_forecasts.column(k).as_slice()))
        .collect()
}

/// Average historical share of each leaf (`m x T` history).
pub fn historical_proportions(history: &DMatrix<f64>) -> Result<Vec<f64>> {
    let m = history.nrows();
    let mut acc = vec![0.0; m];
    let mut used = 0usize;
    for col in history.column_iter() {
        let total: f64 = col.iter().sum();
        if total > 0.0 {
            for (a, v) in acc.iter_mut().zip(col.iter()) {
                *a += v / total;
            }
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::BadProportions("history has no positive total".into()));
    }
    normalise(&acc)
}

/// Shrinkage estimate of the error covariance toward its diagonal with the
/// Schafer-Strimmer intensity. `residuals` is `n x T`; time columns with any
/// non-finite entry are skipped. Returns the estimate and the intensity.
pub fn shrinkage_covariance(residuals: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let n = residuals.nrows();
    let cols: Vec<usize> = (0..residuals.ncols())
        .filter(|&t| residuals.column(t).iter().all(|v| v.is_finite()))
        .collect();
    let t = cols.len();
    if t < 3 {
        return Err(Error::InsufficientHistory { required: 3, actual: t });
    }
    let x = DMatrix::from_fn(n, t, |i, k| residuals[(i, cols[k])]);
    let means: Vec<f64> = x.row_iter().map(|r| r.mean()).collect();
    let centred = DMatrix::from_fn(n, t, |i, k| x[(i, k)] - means[i]);
    let tf = t as f64;
    let cov = &centred * centred.transpose() / (tf - 1.0);
    let sd: Vec<f64> = (0..n).map(|i| cov[(i, i)].sqrt()).collect();
    if sd.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::SingularW);
    }
    let z = DMatrix::from_fn(n, t, |i, k| centred[(i, k)] / sd[i]);

    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let w: Vec<f64> = (0..t).map(|k| z[(i, k)] * z[(j, k)]).collect();
            let wbar = w.iter().sum::<f64>() / tf;
            let r = wbar * tf / (tf - 1.0);
            num += tf / (tf - 1.0).powi(3) * w.iter().map(|v| (v - wbar).powi(2)).sum::<f64>();
            den += r * r;
        }
    }
    let lambda = if den > 0.0 { (num / den).clamp(0.0, 1.0) } else { 1.0 };
    let mut shrunk = cov.clone() * (1.0 - lambda);
    for i in 0..n {
        shrunk[(i, i)] = cov[(i, i)];
    }
    Ok((shrunk, lambda))
}


#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Hierarchy {
        Hierarchy::new("Total", &[("R".into(), vec!["a".into(), "b".into()])]).unwrap()
    }

    fn destinations() -> Hierarchy {
        let r = |name: &str, leaves: &[&str]| (name.to_string(), leaves.iter().map(|s| s.to_string()).collect());
        Hierarchy::new(
            "Total",
            &[
                r("America", &["Canada", "Chile", "Mexico", "USA"]),
                r("East Asia", &["Chinese Taipei", "Hong Kong", "Macao", "Korea (ROK)", "Japan"]),
                r("Southeast Asia", &["Thailand", "Cambodia", "Indonesia", "Singapore", "Maldives"]),
                r("Pacific", &["New Zealand", "Australia", "Hawaii"]),
                r("West Asia", &["Turkey"]),
                r("Europe", &["Austria", "Czech Republic"]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn destination_tree_shape() {
        let h = destinations();
        assert_eq!((h.n(), h.m()), (27, 20));
        assert_eq!(h.summing_matrix().row(0).sum(), 20.0);
        let bottom = h.summing_matrix().rows(7, 20).into_owned();
        assert_eq!(bottom, DMatrix::identity(20, 20));
        assert_eq!(h.parent(h.index_of("Turkey").unwrap()), h.index_of("West Asia"));
    }

    #[test]
    fn duplicate_root_region_is_dropped() {
        let h = toy();
        assert_eq!(h.n(), 3);
        assert_eq!(h.summing_matrix(), &DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, 0.0, 0.0, 1.0]));
    }

    #[test]
    fn malformed_trees() {
        let shared = Hierarchy::new(
            "Total",
            &[("R1".into(), vec!["a".into(), "b".into()]), ("R2".into(), vec!["b".into()])],
        );
        assert!(matches!(shared, Err(Error::MalformedTree(_))));
        assert!(matches!(Hierarchy::new("Total", &[("R".into(), vec![])]), Err(Error::MalformedTree(_))));
    }

    #[test]
    fn top_down_split() {
        let h = toy();
        let g = top_down_g(&h, &[0.5, 0.5]).unwrap();
        let base = DMatrix::from_row_slice(3, 2, &[10.0, 20.0, 0.0, 0.0, 0.0, 0.0]);
        let rec = reconcile(&h, &g, &base).unwrap();
        assert_eq!(rec.row(1).iter().copied().collect::<Vec<_>>(), vec![5.0, 10.0]);
        assert_eq!(rec.row(2).iter().copied().collect::<Vec<_>>(), vec![5.0, 10.0]);
        assert!(matches!(top_down_g(&h, &[0.7, 0.7]), Err(Error::BadProportions(_))));
        let all_first = top_down(&h, &[100.0], &[vec![1.0, 0.0]]).unwrap();
        assert_eq!(all_first.column(0).iter().copied().collect::<Vec<_>>(), vec![100.0, 100.0, 0.0]);
        // Top-down is not unbiased.
        let gs = &g.0 * h.summing_matrix();
        assert!((gs - DMatrix::<f64>::identity(2, 2)).abs().max() > 0.1);
    }

    #[test]
    fn forecast_shares_by_hand() {
        let leaf = DMatrix::from_row_slice(3, 2, &[10.0, 20.0, 30.0, 20.0, 60.0, 60.0]);
        let p = forecast_proportions(&leaf).unwrap();
        assert!((p[0][0] - 0.1).abs() < 1e-15 && (p[0][1] - 0.3).abs() < 1e-15 && (p[0][2] - 0.6).abs() < 1e-15);
        assert!((p[1][0] - 0.2).abs() < 1e-15 && (p[1][2] - 0.6).abs() < 1e-15);
        let hist = historical_proportions(&leaf).unwrap();
        assert!((hist[0] - 0.15).abs() < 1e-15);
    }

    #[test]
    fn identity_w_is_ols_projection() {
        let h = toy();
        let g = mint_g(&h, &DMatrix::identity(3, 3)).unwrap();
        let s = h.summing_matrix();
        let pinv = (s.transpose() * s).try_inverse().unwrap() * s.transpose();
        assert!((&g.0 - pinv).abs().max() < 1e-12);
        assert!((&g.0 * s - DMatrix::<f64>::identity(2, 2)).abs().max() < 1e-12);
    }

    #[test]
    fn coherent_input_is_fixed() {
        let h = destinations();
        let w = DMatrix::from_fn(27, 27, |i, j| if i == j { 1.0 + i as f64 } else { 0.1 });
        let g = mint_g(&h, &w).unwrap();
        let b = DMatrix::from_fn(20, 3, |i, k| (i * 7 + k) as f64);
        let y = h.aggregate(&b).unwrap();
        assert!((reconcile(&h, &g, &y).unwrap() - &y).abs().max() < 1e-9);
    }

    #[test]
    fn wls_matches_diagonal_mint() {
        let h = toy();
        let w = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, 0.2, 0.1, 0.2, 1.5]);
        let diag = DMatrix::from_diagonal(&w.diagonal());
        assert_eq!(wls_g(&h, &w).unwrap(), mint_g(&h, &diag).unwrap());
        assert_eq!(mint_g(&h, &DMatrix::zeros(3, 3)), Err(Error::SingularW));
    }

    #[test]
    fn shrinkage_keeps_variances() {
        let r = DMatrix::from_fn(3, 40, |i, t| ((t * (i + 2)) as f64 * 0.7).sin() + 0.1 * i as f64);
        let (w, lambda) = shrinkage_covariance(&r).unwrap();
        assert!((0.0..=1.0).contains(&lambda));
        assert!((w.clone() - w.transpose()).abs().max() < 1e-15);
        let raw = {
            let c = DMatrix::from_fn(3, 40, |i, t| r[(i, t)] - r.row(i).mean());
            &c * c.transpose() / 39.0
        };
        for i in 0..3 {
            assert!((w[(i, i)] - raw[(i, i)]).abs() < 1e-12);
        }
    }

    #[test]
    fn summing_csv() {
        let mut buf = Vec::new();
        toy().write_summing_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "node,a,b\nTotal,1,1\na,1,0\nb,0,1\n");
    }
}
