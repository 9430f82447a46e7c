use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::case::NetworkCase;

/// Bus admittance matrix in row-compressed form, indexed by bus position.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmittanceMatrix {
    n: usize,
    /// Per-row `(column, value)` pairs sorted by column.
    rows: Vec<Vec<(usize, Complex64)>>,
}

impl AdmittanceMatrix {
    pub fn zeros(n: usize) -> Self {
        AdmittanceMatrix {
            n,
            rows: vec![Vec::new(); n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn add(&mut self, i: usize, j: usize, y: Complex64) {
        let row = &mut self.rows[i];
        match row.binary_search_by_key(&j, |&(c, _)| c) {
            Ok(k) => row[k].1 += y,
            Err(k) => row.insert(k, (j, y)),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let row = &self.rows[i];
        match row.binary_search_by_key(&j, |&(c, _)| c) {
            Ok(k) => row[k].1,
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn row(&self, i: usize) -> &[(usize, Complex64)] {
        &self.rows[i]
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, y) in row {
                m[(i, j)] = y;
            }
        }
        m
    }
}

/// Assemble the bus admittance matrix with the standard pi branch model.
///
/// A tap `t` sits on the `from` side: `Y_ff = (y + jb/2)/t^2`,
/// `Y_ft = Y_tf = -y/t`, `Y_tt = y + jb/2`.
pub fn build_admittance(case: &NetworkCase) -> AdmittanceMatrix {
    let n = case.n_buses();
    let mut ybus = AdmittanceMatrix::zeros(n);
    for (i, bus) in case.buses.iter().enumerate() {
        if bus.shunt != Complex64::new(0.0, 0.0) {
            ybus.add(i, i, bus.shunt);
        }
    }
    for br in &case.branches {
        let f = case.index_of(br.from).expect("validated branch");
        let t = case.index_of(br.to).expect("validated branch");
        let ys = br.series_admittance();
        let half_charging = Complex64::new(0.0, br.b / 2.0);
        let tap = br.tap;
        ybus.add(f, f, (ys + half_charging) / (tap * tap));
        ybus.add(t, t, ys + half_charging);
        ybus.add(f, t, -ys / tap);
        ybus.add(t, f, -ys / tap);
    }
    ybus
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::{ieee14, parse_case};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_lossless_branch() {
        let case = parse_case(
            "base_mva 100\n[bus]\n1 slack 1 1 0 0\n2 pq - 1 0 0\n[branch]\n1 2 0 0.1 0\n",
        )
        .unwrap();
        let y = build_admittance(&case);
        assert!((y.get(0, 1) - c(0.0, 10.0)).norm() < 1e-12);
        assert!((y.get(1, 0) - c(0.0, 10.0)).norm() < 1e-12);
        assert!((y.get(0, 0) - c(0.0, -10.0)).norm() < 1e-12);
        assert!((y.get(1, 1) - c(0.0, -10.0)).norm() < 1e-12);
    }

    #[test]
    fn shunt_changes_only_its_diagonal() {
        let base = "base_mva 100\n[bus]\n1 slack 1 1 0 0\n2 pq - 1 0 0\n3 pq - 1 0 0\n[branch]\n1 2 0.01 0.1 0.02\n2 3 0.02 0.2 0\n";
        let with_shunt = base.replace("3 pq - 1 0 0", "3 pq - 1 0 0.3");
        let y0 = build_admittance(&parse_case(base).unwrap()).to_dense();
        let y1 = build_admittance(&parse_case(&with_shunt).unwrap()).to_dense();
        let diff = &y1 - &y0;
        for i in 0..3 {
            for j in 0..3 {
                let expected = if (i, j) == (2, 2) { c(0.0, 0.3) } else { c(0.0, 0.0) };
                assert!((diff[(i, j)] - expected).norm() < 1e-14, "({i},{j})");
            }
        }
    }

    #[test]
    fn ieee14_structure() {
        let case = ieee14();
        let y = build_admittance(&case);
        // 14 diagonals + 2 per branch, no parallel branches in this case
        assert_eq!(y.nnz(), 14 + 2 * 20);
        let dense = y.to_dense();
        for i in 0..14 {
            for j in 0..14 {
                assert!((dense[(i, j)] - dense[(j, i)]).norm() < 1e-12);
            }
        }
    }
}
