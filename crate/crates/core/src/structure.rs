//! Known graphical structure of the precision matrix.
//!
//! The support of column `i` is the set of rows allowed to be nonzero in
//! `Ω[:, i]`; it always contains `i`. A [`SelectionMap`] stands in for the
//! 0/1 matrix `B_i` that picks those coordinates out of a `p`-vector.

use thiserror::Error;

use crate::linalg::DenseMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StructureError {
    #[error("adjacency matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("adjacency entry ({row}, {col}) is {value}, expected 0 or 1")]
    NotBinary { row: usize, col: usize, value: f64 },
    #[error("adjacency is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },
    #[error("invalid support for column {column}: {reason}")]
    InvalidSupport { column: usize, reason: String },
}

/// Validated zero pattern of a `p × p` precision matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphStructure {
    p: usize,
    supports: Vec<Vec<usize>>,
    edge_count: usize,
}

impl GraphStructure {
    /// Builds a structure from a dense 0/1 adjacency matrix. The diagonal is
    /// ignored; `i` is always in its own support.
    pub fn from_adjacency(a: &DenseMatrix) -> Result<Self, StructureError> {
        if !a.is_square() {
            return Err(StructureError::NotSquare { rows: a.rows(), cols: a.cols() });
        }
        let p = a.rows();
        for i in 0..p {
            for j in 0..p {
                let v = a[(i, j)];
                if v != 0.0 && v != 1.0 {
                    return Err(StructureError::NotBinary { row: i, col: j, value: v });
                }
            }
        }
        for i in 0..p {
            for j in (i + 1)..p {
                if a[(i, j)] != a[(j, i)] {
                    return Err(StructureError::NotSymmetric { row: i, col: j });
                }
            }
        }
        let supports = (0..p)
            .map(|i| (0..p).filter(|&j| j == i || a[(i, j)] == 1.0).collect())
            .collect();
        Ok(Self::from_sorted_supports(p, supports))
    }

    /// Builds a structure from an undirected edge list. Each pair is added in
    /// both directions; duplicates and self-loops are ignored.
    pub fn from_edges(p: usize, edges: &[(usize, usize)]) -> Result<Self, StructureError> {
        let mut supports: Vec<Vec<usize>> = (0..p).map(|i| vec![i]).collect();
        for &(i, j) in edges {
            for idx in [i, j] {
                if idx >= p {
                    return Err(StructureError::IndexOutOfRange { index: idx, dim: p });
                }
            }
            if i != j {
                supports[i].push(j);
                supports[j].push(i);
            }
        }
        for s in &mut supports {
            s.sort_unstable();
            s.dedup();
        }
        Ok(Self::from_sorted_supports(p, supports))
    }

    /// Builds a structure from explicit support lists, validating every invariant.
    pub fn from_supports(supports: Vec<Vec<usize>>) -> Result<Self, StructureError> {
        let p = supports.len();
        for (i, s) in supports.iter().enumerate() {
            if s.windows(2).any(|w| w[0] >= w[1]) {
                return Err(StructureError::InvalidSupport { column: i, reason: "not strictly increasing".into() });
            }
            if let Some(&bad) = s.iter().find(|&&j| j >= p) {
                return Err(StructureError::IndexOutOfRange { index: bad, dim: p });
            }
            if s.binary_search(&i).is_err() {
                return Err(StructureError::InvalidSupport { column: i, reason: "missing diagonal".into() });
            }
            for &j in s {
                if supports[j].binary_search(&i).is_err() {
                    return Err(StructureError::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self::from_sorted_supports(p, supports))
    }

    /// Full graph: every column supported on all `p` rows.
    pub fn complete(p: usize) -> Self {
        Self::from_sorted_supports(p, (0..p).map(|_| (0..p).collect()).collect())
    }

    /// Banded structure, `|i - j| < bandwidth`.
    pub fn banded(p: usize, bandwidth: usize) -> Self {
        let supports = (0..p)
            .map(|i| {
                let lo = i.saturating_sub(bandwidth.saturating_sub(1));
                let hi = (i + bandwidth).min(p);
                (lo..hi.max(i + 1)).collect()
            })
            .collect();
        Self::from_sorted_supports(p, supports)
    }

    fn from_sorted_supports(p: usize, supports: Vec<Vec<usize>>) -> Self {
        let off_diag: usize = supports.iter().map(|s| s.len() - 1).sum();
        Self { p, supports, edge_count: off_diag / 2 }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn supports(&self) -> &[Vec<usize>] {
        &self.supports
    }

    pub fn support(&self, i: usize) -> &[usize] {
        &self.supports[i]
    }

    /// Number of undirected off-diagonal edges.
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Largest support size over all columns.
    pub fn max_support(&self) -> usize {
        self.supports.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.supports[j].binary_search(&i).is_ok()
    }

    /// Selection map `B_i` for column `i`.
    pub fn selection(&self, i: usize) -> Result<SelectionMap, StructureError> {
        if i >= self.p {
            return Err(StructureError::IndexOutOfRange { index: i, dim: self.p });
        }
        let support = self.supports[i].clone();
        let pivot = support.binary_search(&i).expect("support contains its own column");
        Ok(SelectionMap { column: i, support, pivot })
    }

    /// Dense 0/1 adjacency with a zero diagonal.
    pub fn to_adjacency(&self) -> DenseMatrix {
        let mut a = DenseMatrix::zeros(self.p, self.p);
        for (i, s) in self.supports.iter().enumerate() {
            for &j in s {
                if j != i {
                    a[(j, i)] = 1.0;
                }
            }
        }
        a
    }
}

/// Index-list form of `B_i`: `support[pivot] == column`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionMap {
    column: usize,
    support: Vec<usize>,
    pivot: usize,
}

impl SelectionMap {
    pub fn column(&self) -> usize {
        self.column
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn pivot(&self) -> usize {
        self.pivot
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// `f_i = B_iᵀ e_i`: indicator of the pivot position.
    pub fn indicator(&self) -> Vec<f64> {
        let mut f = vec![0.0; self.support.len()];
        f[self.pivot] = 1.0;
        f
    }

    /// `B_iᵀ v`: the support coordinates of a `p`-vector.
    pub fn gather(&self, v: &[f64]) -> Vec<f64> {
        self.support.iter().map(|&j| v[j]).collect()
    }
}

/// `B_iᵀ S B_i`.
pub fn extract_submatrix(s: &DenseMatrix, map: &SelectionMap) -> Result<DenseMatrix, StructureError> {
    if !s.is_square() {
        return Err(StructureError::DimensionMismatch {
            expected: "square matrix".into(),
            found: format!("{}x{}", s.rows(), s.cols()),
        });
    }
    if let Some(&last) = map.support.last() {
        if last >= s.rows() {
            return Err(StructureError::DimensionMismatch {
                expected: format!("dimension > {last}"),
                found: format!("{}x{}", s.rows(), s.cols()),
            });
        }
    }
    let idx = &map.support;
    Ok(DenseMatrix::from_fn(idx.len(), idx.len(), |a, b| s[(idx[a], idx[b])]))
}

/// `B_i v`: places support values into a zero `p`-vector.
pub fn scatter_column(values: &[f64], map: &SelectionMap, p: usize) -> Result<Vec<f64>, StructureError> {
    if values.len() != map.support.len() {
        return Err(StructureError::DimensionMismatch {
            expected: format!("{} values", map.support.len()),
            found: format!("{}", values.len()),
        });
    }
    if let Some(&last) = map.support.last() {
        if last >= p {
            return Err(StructureError::IndexOutOfRange { index: last, dim: p });
        }
    }
    let mut out = vec![0.0; p];
    for (&j, &v) in map.support.iter().zip(values) {
        out[j] = v;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn band1_p3() -> GraphStructure {
        let a = DenseMatrix::from_rows(&[[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]]).unwrap();
        GraphStructure::from_adjacency(&a).unwrap()
    }

    #[test]
    fn zero_adjacency_gives_diagonal_supports() {
        let g = GraphStructure::from_adjacency(&DenseMatrix::zeros(3, 3)).unwrap();
        assert_eq!(g.supports(), &[vec![0], vec![1], vec![2]]);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn band_adjacency() {
        let g = band1_p3();
        assert_eq!(g.supports(), &[vec![0, 1], vec![0, 1, 2], vec![1, 2]]);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g, GraphStructure::banded(3, 2));
    }

    #[test]
    fn adjacency_errors() {
        let asym = DenseMatrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]]).unwrap();
        assert!(matches!(GraphStructure::from_adjacency(&asym), Err(StructureError::NotSymmetric { .. })));
        let nonbin = DenseMatrix::from_rows(&[[0.0, 0.5], [0.5, 0.0]]).unwrap();
        assert!(matches!(GraphStructure::from_adjacency(&nonbin), Err(StructureError::NotBinary { .. })));
        let rect = DenseMatrix::zeros(2, 3);
        assert!(matches!(GraphStructure::from_adjacency(&rect), Err(StructureError::NotSquare { .. })));
    }

    #[test]
    fn diagonal_entry_does_not_matter() {
        let a = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap();
        let g = GraphStructure::from_adjacency(&a).unwrap();
        assert_eq!(g.supports(), &[vec![0], vec![1]]);
    }

    #[test]
    fn edge_list_is_symmetrized() {
        let g = GraphStructure::from_edges(3, &[(0, 1), (2, 1), (1, 0)]).unwrap();
        assert_eq!(g, band1_p3());
        assert!(matches!(GraphStructure::from_edges(3, &[(0, 3)]), Err(StructureError::IndexOutOfRange { .. })));
    }

    #[test]
    fn from_supports_validates() {
        assert!(GraphStructure::from_supports(vec![vec![0, 1], vec![0, 1]]).is_ok());
        assert!(GraphStructure::from_supports(vec![vec![0, 1], vec![1]]).is_err());
        assert!(GraphStructure::from_supports(vec![vec![1], vec![0, 1]]).is_err());
        assert!(GraphStructure::from_supports(vec![vec![1, 0], vec![0, 1]]).is_err());
    }

    #[test]
    fn selection_cases() {
        let diag = GraphStructure::from_adjacency(&DenseMatrix::zeros(3, 3)).unwrap();
        let m = diag.selection(2).unwrap();
        assert_eq!((m.support(), m.pivot()), (&[2][..], 0));

        let m = band1_p3().selection(1).unwrap();
        assert_eq!((m.support(), m.pivot()), (&[0, 1, 2][..], 1));
        assert_eq!(m.indicator(), vec![0.0, 1.0, 0.0]);

        assert!(matches!(diag.selection(5), Err(StructureError::IndexOutOfRange { index: 5, dim: 3 })));
    }

    #[test]
    fn extract_cases() {
        let g = GraphStructure::from_edges(3, &[(0, 2)]).unwrap();
        let map = g.selection(0).unwrap();
        assert_eq!(map.support(), &[0, 2]);
        assert_eq!(extract_submatrix(&DenseMatrix::identity(3), &map).unwrap(), DenseMatrix::identity(2));
        let s = DenseMatrix::from_rows(&[[1.0, 2.0, 3.0], [2.0, 5.0, 6.0], [3.0, 6.0, 9.0]]).unwrap();
        let sub = extract_submatrix(&s, &map).unwrap();
        assert_eq!(sub, DenseMatrix::from_rows(&[[1.0, 3.0], [3.0, 9.0]]).unwrap());
        assert!(matches!(
            extract_submatrix(&DenseMatrix::zeros(2, 3), &map),
            Err(StructureError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn scatter_cases() {
        let g = GraphStructure::from_adjacency(&DenseMatrix::zeros(4, 4)).unwrap();
        assert_eq!(scatter_column(&[5.0], &g.selection(2).unwrap(), 4).unwrap(), vec![0.0, 0.0, 5.0, 0.0]);
        let full = GraphStructure::complete(3).selection(0).unwrap();
        assert_eq!(scatter_column(&[1.0, 2.0, 3.0], &full, 3).unwrap(), vec![1.0, 2.0, 3.0]);
        let g = GraphStructure::from_edges(3, &[(0, 2)]).unwrap();
        assert_eq!(scatter_column(&[1.0, 2.0], &g.selection(0).unwrap(), 3).unwrap(), vec![1.0, 0.0, 2.0]);
        assert!(scatter_column(&[1.0], &g.selection(0).unwrap(), 3).is_err());
    }

    fn arb_structure() -> impl Strategy<Value = GraphStructure> {
        (1usize..12).prop_flat_map(|p| {
            proptest::collection::vec((0..p, 0..p), 0..(p * 2)).prop_map(move |edges| {
                GraphStructure::from_edges(p, &edges).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn supports_are_symmetric_and_contain_diagonal(g in arb_structure()) {
            for i in 0..g.p() {
                prop_assert!(g.contains(i, i));
                prop_assert!(g.support(i).windows(2).all(|w| w[0] < w[1]));
                for &j in g.support(i) {
                    prop_assert!(g.contains(i, j) && g.contains(j, i));
                }
            }
            // adjacency round trip goes through the strict dense path
            let back = GraphStructure::from_adjacency(&g.to_adjacency()).unwrap();
            prop_assert_eq!(back, g);
        }

        #[test]
        fn gather_after_scatter_is_identity(g in arb_structure(), seed in any::<u64>()) {
            for i in 0..g.p() {
                let map = g.selection(i).unwrap();
                let values: Vec<f64> = (0..map.len())
                    .map(|k| (seed.wrapping_mul(k as u64 + 1) % 1000) as f64 / 7.0 - 50.0)
                    .collect();
                let full = scatter_column(&values, &map, g.p()).unwrap();
                prop_assert_eq!(map.gather(&full), values);
                let off: f64 = (0..g.p()).filter(|j| !g.contains(*j, i)).map(|j| full[j].abs()).sum();
                prop_assert_eq!(off, 0.0);
            }
        }
    }
}
