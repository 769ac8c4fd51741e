use super::model::Space;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_deviation, min_eigenvalue, DMat, SparseMatrix, C64, ZERO};
use serde::{Deserialize, Serialize};

const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-8;
const POSITIVITY_TOL: f64 = 1e-7;
const IMAG_RESIDUE_TOL: f64 = 1e-9;

/// Hermitian, unit-trace, positive operator on a tensor-product space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    space: Space,
    data: DMat,
}

impl DensityMatrix {
    /// Wraps `data` after checking it is a valid state.
    pub fn new(data: DMat, space: Space) -> Result<Self> {
        let rho = Self::unchecked(data, space)?;
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn unchecked(data: DMat, space: Space) -> Result<Self> {
        let n = space.total();
        if data.nrows() != n || data.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: data.nrows(),
            });
        }
        Ok(Self { space, data })
    }

    pub fn pure(psi: &[C64], space: Space) -> Result<Self> {
        let n = space.total();
        if psi.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: psi.len(),
            });
        }
        let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::NotNormalized { norm_sqr: norm });
        }
        let v = nalgebra::DVector::from_column_slice(psi);
        Ok(Self {
            space,
            data: &v * v.adjoint(),
        })
    }

    /// Product basis state `|digits>`.
    pub fn basis(digits: &[usize], space: Space) -> Result<Self> {
        if digits.len() != space.dims.len() || digits.iter().zip(&space.dims).any(|(d, n)| d >= n) {
            return Err(Error::invalid("digits", format!("{digits:?} not in space {:?}", space.dims)));
        }
        let mut data = DMat::zeros(space.total(), space.total());
        let i = space.index(digits);
        data[(i, i)] = C64::new(1.0, 0.0);
        Ok(Self { space, data })
    }

    pub fn ground(space: Space) -> Self {
        let digits = vec![0; space.dims.len()];
        Self::basis(&digits, space).expect("ground state is always in range")
    }

    /// Diagonal state with the given populations (normalised).
    pub fn from_populations(pops: &[f64], space: Space) -> Result<Self> {
        let total: f64 = pops.iter().sum();
        if pops.iter().any(|p| *p < 0.0) || !(total > 0.0) {
            return Err(Error::InvalidState("populations must be non-negative".into()));
        }
        let diag: Vec<C64> = pops.iter().map(|p| C64::new(p / total, 0.0)).collect();
        let data = DMat::from_diagonal(&nalgebra::DVector::from_vec(diag));
        Self::new(data, space)
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &DMat {
        &self.data
    }

    pub fn into_matrix(self) -> DMat {
        self.data
    }

    pub fn trace(&self) -> C64 {
        self.data.trace()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.data)
    }

    /// Checks Hermiticity, trace and positivity.
    pub fn validate(&self) -> Result<()> {
        let dev = hermitian_deviation(&self.data);
        if dev > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {dev:e})")));
        }
        let tr = self.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = self.min_eigenvalue();
        if min < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    /// Reduced state on the listed subsystems, kept in their original order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let dims = &self.space.dims;
        if keep.iter().any(|&k| k >= dims.len()) || keep.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("keep", format!("{keep:?} is not an ordered subset of {dims:?}")));
        }
        let kept = Space::new(keep.iter().map(|&k| dims[k]).collect());
        let n = self.dim();
        let reduced_index: Vec<usize> = (0..n)
            .map(|i| {
                let d = self.space.digits(i);
                kept.index(&keep.iter().map(|&k| d[k]).collect::<Vec<_>>())
            })
            .collect();
        let traced_key: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                let d = self.space.digits(i);
                (0..dims.len()).filter(|k| !keep.contains(k)).map(|k| d[k]).collect()
            })
            .collect();
        let mut out = DMat::zeros(kept.total(), kept.total());
        for i in 0..n {
            for j in 0..n {
                let v = self.data[(i, j)];
                if v != ZERO && traced_key[i] == traced_key[j] {
                    out[(reduced_index[i], reduced_index[j])] += v;
                }
            }
        }
        Ok(DensityMatrix { space: kept, data: out })
    }

    /// Embeds into a space with equal or larger dimensions per subsystem,
    /// padding with zeros.
    pub fn pad_to(&self, space: &Space) -> Result<DensityMatrix> {
        if space.dims.len() != self.space.dims.len()
            || space.dims.iter().zip(&self.space.dims).any(|(a, b)| a < b)
        {
            return Err(Error::invalid("space", format!("cannot pad {:?} into {:?}", self.space.dims, space.dims)));
        }
        let map: Vec<usize> = (0..self.dim()).map(|i| space.index(&self.space.digits(i))).collect();
        let mut out = DMat::zeros(space.total(), space.total());
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                out[(map[i], map[j])] = self.data[(i, j)];
            }
        }
        Ok(DensityMatrix {
            space: space.clone(),
            data: out,
        })
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        let mut dims = self.space.dims.clone();
        dims.extend(&other.space.dims);
        DensityMatrix {
            space: Space::new(dims),
            data: self.data.kronecker(&other.data),
        }
    }

    /// `U rho U^dagger`.
    pub fn transform(&self, u: &DMat) -> DensityMatrix {
        DensityMatrix {
            space: self.space.clone(),
            data: u * &self.data * u.adjoint(),
        }
    }

    pub fn to_record(&self) -> DensityRecord {
        DensityRecord {
            dims: self.space.dims.clone(),
            data: (0..self.dim())
                .map(|r| (0..self.dim()).map(|c| [self.data[(r, c)].re, self.data[(r, c)].im]).collect())
                .collect(),
        }
    }

    pub fn from_record(rec: &DensityRecord) -> Result<Self> {
        let space = Space::new(rec.dims.clone());
        let n = space.total();
        if rec.data.len() != n || rec.data.iter().any(|row| row.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: rec.data.len(),
            });
        }
        let data = DMat::from_fn(n, n, |r, c| C64::new(rec.data[r][c][0], rec.data[r][c][1]));
        Self::new(data, space)
    }
}

/// Serialised form: subsystem dimensions and rows of `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRecord {
    pub dims: Vec<usize>,
    pub data: Vec<Vec<[f64; 2]>>,
}

/// `Tr(rho O)` for a Hermitian observable.
pub fn expectation(rho: &DensityMatrix, observable: &SparseMatrix) -> Result<f64> {
    let n = rho.dim();
    if observable.nrows() != n || observable.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: observable.nrows(),
        });
    }
    let deviation = observable.hermitian_deviation();
    if deviation > 1e-12 {
        return Err(Error::NonHermitian { deviation });
    }
    let mut acc = ZERO;
    for (r, c, v) in observable.triplets() {
        acc += v * rho.data[(c, r)];
    }
    if acc.im.abs() > IMAG_RESIDUE_TOL * acc.re.abs().max(1.0) {
        return Err(Error::InvalidState(format!("expectation has imaginary part {:e}", acc.im)));
    }
    Ok(acc.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::model::{embed, number};

    #[test]
    fn ground_has_no_excitation_and_unit_trace() {
        let space = Space::new(vec![3, 4]);
        let rho = DensityMatrix::ground(space.clone());
        rho.validate().unwrap();
        let excited = embed(&SparseMatrix::from_diagonal(&[ZERO, C64::new(1.0, 0.0), C64::new(1.0, 0.0)]), 0, &space);
        assert_eq!(expectation(&rho, &excited).unwrap(), 0.0);
        assert!((expectation(&rho, &SparseMatrix::identity(12)).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn thermal_photon_number() {
        let n: f64 = 5.0;
        let cutoff = 80;
        let pops: Vec<f64> = (0..cutoff).map(|k| (n / (n + 1.0)).powi(k as i32)).collect();
        let rho = DensityMatrix::from_populations(&pops, Space::new(vec![cutoff])).unwrap();
        let tail = (n / (n + 1.0)).powi(cutoff as i32);
        let mean = expectation(&rho, &number(cutoff)).unwrap();
        assert!((mean - n).abs() < 200.0 * tail + 1e-9, "{mean}");
    }

    #[test]
    fn non_hermitian_observable_rejected() {
        let rho = DensityMatrix::ground(Space::new(vec![2]));
        let bad = SparseMatrix::from_triplets(2, 2, vec![(0, 1, C64::new(1.0, 0.0))]);
        assert!(matches!(expectation(&rho, &bad), Err(Error::NonHermitian { .. })));
    }

    #[test]
    fn partial_trace_of_product_recovers_factors() {
        let a = DensityMatrix::from_populations(&[0.7, 0.3], Space::new(vec![2])).unwrap();
        let b = DensityMatrix::from_populations(&[0.5, 0.25, 0.25], Space::new(vec![3])).unwrap();
        let ab = a.tensor(&b);
        let ra = ab.partial_trace(&[0]).unwrap();
        let rb = ab.partial_trace(&[1]).unwrap();
        assert!((ra.matrix() - a.matrix()).norm() < 1e-15);
        assert!((rb.matrix() - b.matrix()).norm() < 1e-15);
    }

    #[test]
    fn record_round_trip_and_padding() {
        let psi = [C64::new(0.6, 0.0), C64::new(0.0, 0.8)];
        let rho = DensityMatrix::pure(&psi, Space::new(vec![2])).unwrap();
        let back = DensityMatrix::from_record(&rho.to_record()).unwrap();
        assert_eq!(back, rho);
        let big = rho.pad_to(&Space::new(vec![3])).unwrap();
        big.validate().unwrap();
        assert_eq!(big.matrix()[(1, 0)], rho.matrix()[(1, 0)]);
    }

    #[test]
    fn invalid_states_rejected() {
        let space = Space::new(vec![2]);
        let neg = DMat::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::new(1.1, 0.0), C64::new(-0.1, 0.0)]));
        assert!(DensityMatrix::new(neg, space.clone()).is_err());
        let half = DMat::identity(2, 2).scale(0.25);
        assert!(DensityMatrix::new(half, space).is_err());
    }
}
