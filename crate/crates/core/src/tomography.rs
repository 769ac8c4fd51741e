//! Linear-inversion state and process tomography on simulated outcome
//! probabilities, with optional readout-confusion distortion and correction.
//!
//! Only the `{|0>, |1>}` block of each qubit is reconstructed; population in
//! higher levels is reported as leakage. Pauli order is `(I, X, Y, Z)`.

use crate::dynamics::DensityMatrix;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_deviation, DMat, C64, I, ZERO};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// `m[i][j] = P(read j | prepared i)` over `{ground, excited}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub m: [[f64; 2]; 2],
}

impl ConfusionMatrix {
    pub const IDENTITY: ConfusionMatrix = ConfusionMatrix {
        m: [[1.0, 0.0], [0.0, 1.0]],
    };

    pub fn new(m: [[f64; 2]; 2]) -> Result<Self> {
        for row in &m {
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) || (row[0] + row[1] - 1.0).abs() > 1e-12 {
                return Err(Error::invalid("confusion", format!("row {row:?} is not a probability vector")));
            }
        }
        Ok(Self { m })
    }

    /// Equal flip probability `error` for both outcomes.
    pub fn symmetric(error: f64) -> Result<Self> {
        Self::new([[1.0 - error, error], [error, 1.0 - error]])
    }

    fn determinant(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    /// Maps true to read probabilities: `p_read[j] = sum_i m[i][j] p[i]`.
    fn forward(&self) -> [[f64; 2]; 2] {
        [[self.m[0][0], self.m[1][0]], [self.m[0][1], self.m[1][1]]]
    }

    fn inverse_forward(&self) -> Result<[[f64; 2]; 2]> {
        let det = self.determinant();
        if det.abs() < 1e-12 {
            return Err(Error::Singular("confusion matrix is not invertible".into()));
        }
        let f = self.forward();
        Ok([[f[1][1] / det, -f[0][1] / det], [-f[1][0] / det, f[0][0] / det]])
    }
}

fn apply_per_qubit(probs: &[f64], maps: &[[[f64; 2]; 2]]) -> Result<Vec<f64>> {
    let n = maps.len();
    if probs.len() != 1 << n {
        return Err(Error::DimensionMismatch {
            expected: 1 << n,
            found: probs.len(),
        });
    }
    let mut p = probs.to_vec();
    for (q, map) in maps.iter().enumerate() {
        let stride = 1 << (n - 1 - q);
        let mut out = vec![0.0; p.len()];
        for (idx, slot) in out.iter_mut().enumerate() {
            let bit = (idx / stride) & 1;
            let base = idx - bit * stride;
            *slot = map[bit][0] * p[base] + map[bit][1] * p[base + stride];
        }
        p = out;
    }
    Ok(p)
}

/// Applies readout confusion to ideal outcome probabilities (qubit 0 is the
/// most significant bit).
pub fn spam_distort(probs: &[f64], confusion: &[ConfusionMatrix]) -> Result<Vec<f64>> {
    let maps: Vec<_> = confusion.iter().map(ConfusionMatrix::forward).collect();
    apply_per_qubit(probs, &maps)
}

/// Inverts the confusion, clips small negative results and renormalises.
pub fn spam_correct(probs: &[f64], confusion: &[ConfusionMatrix]) -> Result<Vec<f64>> {
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("probabilities", format!("sum to {total}, not 1")));
    }
    if confusion.iter().all(|c| *c == ConfusionMatrix::IDENTITY) {
        return Ok(probs.to_vec());
    }
    let maps = confusion.iter().map(ConfusionMatrix::inverse_forward).collect::<Result<Vec<_>>>()?;
    let mut p = apply_per_qubit(probs, &maps)?;
    for v in &mut p {
        if *v < 0.0 && *v > -1e-6 {
            *v = 0.0;
        }
    }
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
    Ok(p)
}

/// Reduced qubit-block state and the weight that was outside it.
pub fn project_qubits(rho: &DensityMatrix) -> Result<(DMat, f64)> {
    let dims = &rho.space().dims;
    let n = dims.len();
    let keep: Vec<usize> = (0..1usize << n)
        .map(|bits| {
            let digits: Vec<usize> = (0..n).map(|q| (bits >> (n - 1 - q)) & 1).collect();
            rho.space().index(&digits)
        })
        .collect();
    let block = DMat::from_fn(keep.len(), keep.len(), |r, c| rho.matrix()[(keep[r], keep[c])]);
    let inside = block.trace().re;
    if !(inside > 0.0) {
        return Err(Error::InvalidState("no weight in the qubit subspace".into()));
    }
    Ok((block.unscale(inside), 1.0 - inside))
}

/// Measurement settings for state tomography.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TomographySettings {
    /// Per-qubit readout confusion; `None` is ideal readout.
    pub confusion: Option<Vec<ConfusionMatrix>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateTomogram {
    pub rho: DMat,
    pub fidelity: Option<f64>,
    pub leakage: f64,
    /// Total weight of negative eigenvalues removed.
    pub clipped: f64,
}

fn pauli(k: usize) -> DMat {
    let o = C64::new(1.0, 0.0);
    match k {
        0 => DMat::from_row_slice(2, 2, &[o, ZERO, ZERO, o]),
        1 => DMat::from_row_slice(2, 2, &[ZERO, o, o, ZERO]),
        2 => DMat::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        _ => DMat::from_row_slice(2, 2, &[o, ZERO, ZERO, -o]),
    }
}

/// Pre-rotation that maps the eigenbasis of Pauli `k` onto Z.
fn pre_rotation(k: usize) -> DMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    match k {
        // Ry(-pi/2)
        1 => DMat::from_row_slice(2, 2, &[C64::new(s, 0.0), C64::new(s, 0.0), C64::new(-s, 0.0), C64::new(s, 0.0)]),
        // Rx(pi/2)
        2 => DMat::from_row_slice(2, 2, &[C64::new(s, 0.0), C64::new(0.0, -s), C64::new(0.0, -s), C64::new(s, 0.0)]),
        _ => DMat::identity(2, 2),
    }
}

fn kron_all(ms: &[DMat]) -> DMat {
    ms.iter().skip(1).fold(ms[0].clone(), |acc, m| acc.kronecker(m))
}

/// Linear-inversion tomography of `rho`'s qubit block from simulated Pauli
/// measurements. When `target` is given its fidelity is reported.
pub fn state_tomography(rho: &DensityMatrix, settings: &TomographySettings, target: Option<&[C64]>) -> Result<StateTomogram> {
    let (block, leakage) = project_qubits(rho)?;
    let n = rho.space().dims.len();
    let dim = 1usize << n;
    let ideal = vec![ConfusionMatrix::IDENTITY; n];
    let confusion = settings.confusion.as_deref().unwrap_or(&ideal);
    if confusion.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: confusion.len(),
        });
    }
    let settings_count = 3usize.pow(n as u32);
    // expectation of each Pauli string, index sum k_q 4^(n-1-q)
    let mut expect = vec![None::<f64>; 1 << (2 * n)];
    for s in 0..settings_count {
        let bases: Vec<usize> = (0..n).map(|q| 1 + (s / 3usize.pow((n - 1 - q) as u32)) % 3).collect();
        let u = kron_all(&bases.iter().map(|&b| pre_rotation(b)).collect::<Vec<_>>());
        let rotated = &u * &block * u.adjoint();
        let ideal_probs: Vec<f64> = (0..dim).map(|i| rotated[(i, i)].re.max(0.0)).collect();
        let norm: f64 = ideal_probs.iter().sum();
        let ideal_probs: Vec<f64> = ideal_probs.iter().map(|p| p / norm).collect();
        let read = spam_distort(&ideal_probs, confusion)?;
        let probs = spam_correct(&read, confusion)?;
        for subset in 0..(1usize << n) {
            let mut idx = 0;
            for q in 0..n {
                let k = if (subset >> (n - 1 - q)) & 1 == 1 { bases[q] } else { 0 };
                idx = idx * 4 + k;
            }
            if expect[idx].is_some() {
                continue;
            }
            let value: f64 = (0..dim)
                .map(|outcome| {
                    let parity = (outcome & subset).count_ones();
                    if parity % 2 == 0 {
                        probs[outcome]
                    } else {
                        -probs[outcome]
                    }
                })
                .sum();
            expect[idx] = Some(value);
        }
    }
    let mut recon = DMat::zeros(dim, dim);
    for (idx, e) in expect.iter().enumerate() {
        let e = e.expect("every Pauli string is measured");
        let ks: Vec<usize> = (0..n).map(|q| (idx >> (2 * (n - 1 - q))) & 3).collect();
        recon += kron_all(&ks.iter().map(|&k| pauli(k)).collect::<Vec<_>>()).scale(e);
    }
    recon = recon.unscale(dim as f64);
    let (rho_out, clipped) = clip_to_physical(recon);
    let fidelity = match target {
        Some(psi) => Some(fidelity_state(&rho_out, psi)?),
        None => None,
    };
    Ok(StateTomogram {
        rho: rho_out,
        fidelity,
        leakage,
        clipped,
    })
}

/// Removes negative eigenvalues and renormalises; returns the removed weight.
fn clip_to_physical(m: DMat) -> (DMat, f64) {
    let h = (&m + m.adjoint()).scale(0.5);
    let eig = h.clone().symmetric_eigen();
    let negative: f64 = eig.eigenvalues.iter().filter(|&&v| v < 0.0).map(|v| -v).sum();
    if negative == 0.0 {
        return (h, 0.0);
    }
    if eig.eigenvalues.iter().any(|&v| v < -1e-6) {
        log::warn!("tomography: clipping negative eigenvalues (total {negative:e})");
    }
    let clipped = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&v| C64::new(v.max(0.0), 0.0)),
    );
    let v = &eig.eigenvectors;
    let out = v * DMat::from_diagonal(&clipped) * v.adjoint();
    let tr = out.trace().re;
    (out.unscale(tr), negative)
}

/// `<psi| rho |psi>`.
pub fn fidelity_state(rho: &DMat, target: &[C64]) -> Result<f64> {
    if target.len() != rho.nrows() {
        return Err(Error::DimensionMismatch {
            expected: rho.nrows(),
            found: target.len(),
        });
    }
    let norm: f64 = target.iter().map(|c| c.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized { norm_sqr: norm });
    }
    let psi = DVector::from_column_slice(target);
    let f = (psi.adjoint() * rho * &psi)[(0, 0)];
    if f.im.abs() > 1e-9 {
        return Err(Error::InvalidState(format!("fidelity has imaginary part {:e}", f.im)));
    }
    Ok(f.re)
}

/// `(|01> + |10>)/sqrt(2)` in the `|A B>` basis.
pub fn bell_target() -> Vec<C64> {
    let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    vec![ZERO, s, s, ZERO]
}

/// Single-qubit process in the Pauli basis `(I, X, Y, Z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessMatrix {
    pub chi: DMat,
}

impl ProcessMatrix {
    /// Overlap with the identity process, `chi_00`.
    pub fn fidelity(&self) -> f64 {
        self.chi[(0, 0)].re
    }

    /// Overlap with another process, `Tr(chi chi_ideal)`.
    pub fn overlap(&self, ideal: &ProcessMatrix) -> f64 {
        (&self.chi * &ideal.chi).trace().re
    }

    /// `sum chi_mn P_n^dagger P_m`, which is the identity for a
    /// trace-preserving process.
    pub fn trace_condition(&self) -> DMat {
        let mut acc = DMat::zeros(2, 2);
        for m in 0..4 {
            for n in 0..4 {
                acc += pauli(n).adjoint() * pauli(m) * self.chi[(m, n)];
            }
        }
        acc
    }

    pub fn validate(&self) -> Result<()> {
        let dev = hermitian_deviation(&self.chi);
        if dev > 1e-9 {
            return Err(Error::NonHermitian { deviation: dev });
        }
        let tp = (self.trace_condition() - DMat::identity(2, 2)).iter().map(|v| v.norm()).fold(0.0, f64::max);
        if tp > 1e-6 {
            return Err(Error::InvalidState(format!("process is not trace preserving ({tp:e})")));
        }
        Ok(())
    }

    /// Process of a unitary channel.
    pub fn from_unitary(u: &DMat) -> Self {
        let ch = |rho: &DMat| u * rho * u.adjoint();
        Self::from_outputs(&channel_outputs(&ch))
    }

    /// Builds chi from the channel's action on `|0><0|`, `|1><1|`, `|+><+|`
    /// and `|+i><+i|`.
    pub fn from_outputs(outputs: &[DMat; 4]) -> Self {
        let [e00, e11, ep, epi] = outputs;
        let a = ep.scale(2.0) - e00 - e11;
        let b = epi.scale(2.0) - e00 - e11;
        let e01 = (&a + &b * I).scale(0.5);
        let e10 = (&a - &b * I).scale(0.5);
        let blocks = [[e00, &e01], [&e10, e11]];
        let mut choi = DMat::zeros(4, 4);
        for i in 0..2 {
            for j in 0..2 {
                for r in 0..2 {
                    for c in 0..2 {
                        choi[(2 * i + r, 2 * j + c)] = blocks[i][j][(r, c)];
                    }
                }
            }
        }
        let vecs: Vec<DVector<C64>> = (0..4)
            .map(|m| {
                let p = pauli(m);
                DVector::from_fn(4, |idx, _| p[(idx % 2, idx / 2)])
            })
            .collect();
        let chi = DMat::from_fn(4, 4, |m, n| (vecs[m].adjoint() * &choi * &vecs[n])[(0, 0)] / 4.0);
        ProcessMatrix { chi }
    }

    pub fn identity() -> Self {
        let mut chi = DMat::zeros(4, 4);
        chi[(0, 0)] = C64::new(1.0, 0.0);
        ProcessMatrix { chi }
    }
}

/// The four tomography inputs as density matrices.
pub fn input_states() -> [DMat; 4] {
    let o = C64::new(1.0, 0.0);
    let h = C64::new(0.5, 0.0);
    [
        DMat::from_row_slice(2, 2, &[o, ZERO, ZERO, ZERO]),
        DMat::from_row_slice(2, 2, &[ZERO, ZERO, ZERO, o]),
        DMat::from_row_slice(2, 2, &[h, h, h, h]),
        DMat::from_row_slice(2, 2, &[h, -I * 0.5, I * 0.5, h]),
    ]
}

/// Applies a channel to the four inputs.
pub fn channel_outputs(channel: &dyn Fn(&DMat) -> DMat) -> [DMat; 4] {
    input_states().map(|rho| channel(&rho))
}

/// Result of process tomography on simulated outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessTomogram {
    pub process: ProcessMatrix,
    pub leakage: [f64; 4],
    pub clipped: f64,
}

/// Reconstructs each output by state tomography and assembles chi. The
/// outputs must be single-qubit states listed as `|0>, |1>, |+>, |+i>`.
pub fn process_tomography(outputs: &[DensityMatrix; 4], settings: &TomographySettings) -> Result<ProcessTomogram> {
    let mut recon: Vec<DMat> = Vec::with_capacity(4);
    let mut leakage = [0.0; 4];
    let mut clipped = 0.0;
    for (k, out) in outputs.iter().enumerate() {
        if out.space().dims.len() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: out.space().dims.len(),
            });
        }
        let t = state_tomography(out, settings, None)?;
        leakage[k] = t.leakage;
        clipped += t.clipped;
        recon.push(t.rho);
    }
    let arr: [DMat; 4] = recon.try_into().expect("four outputs");
    Ok(ProcessTomogram {
        process: ProcessMatrix::from_outputs(&arr),
        leakage,
        clipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Space;

    #[test]
    fn hand_checked_spam_inversion() {
        let m = ConfusionMatrix::symmetric(0.04).unwrap();
        let p = spam_correct(&[0.9, 0.1], &[m]).unwrap();
        // [[0.96, 0.04], [0.04, 0.96]]^-1 (0.9, 0.1) = (0.8600, 0.0600)/0.92
        assert!((p[0] - 0.86 / 0.92).abs() < 1e-12);
        assert!((p[1] - 0.06 / 0.92).abs() < 1e-12);
        assert!((p[0] - 0.935).abs() < 1e-3);
    }

    #[test]
    fn identity_confusion_is_bit_exact() {
        let probs = [0.1, 0.2, 0.3, 0.4];
        let id = [ConfusionMatrix::IDENTITY; 2];
        assert_eq!(spam_correct(&spam_distort(&probs, &id).unwrap(), &id).unwrap(), probs.to_vec());
        assert!(ConfusionMatrix::new([[0.5, 0.5], [0.5, 0.5]]).is_ok());
        assert!(spam_correct(&[0.5, 0.5], &[ConfusionMatrix::new([[0.5, 0.5], [0.5, 0.5]]).unwrap()]).is_err());
    }

    #[test]
    fn perfect_bell_state_has_unit_fidelity() {
        let rho = DensityMatrix::pure(&bell_target(), Space::new(vec![2, 2])).unwrap();
        let t = state_tomography(&rho, &TomographySettings::default(), Some(&bell_target())).unwrap();
        assert!((t.fidelity.unwrap() - 1.0).abs() < 1e-12);
        assert!(t.leakage.abs() < 1e-15);
    }

    #[test]
    fn maximally_mixed_has_quarter_fidelity() {
        let mixed = DMat::identity(4, 4).scale(0.25);
        assert!((fidelity_state(&mixed, &bell_target()).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn depolarising_channel() {
        let half = DMat::identity(2, 2).scale(0.5);
        let chi = ProcessMatrix::from_outputs(&[half.clone(), half.clone(), half.clone(), half]);
        assert!((chi.fidelity() - 0.25).abs() < 1e-12);
        for k in 0..4 {
            assert!((chi.chi[(k, k)].re - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn unitary_process_fidelity() {
        for k in 0..4 {
            let u = pauli(k);
            let chi = ProcessMatrix::from_unitary(&u);
            let expected = (u.trace() / 2.0).norm_sqr();
            assert!((chi.fidelity() - expected).abs() < 1e-9);
            chi.validate().unwrap();
        }
        let id = ProcessMatrix::from_unitary(&DMat::identity(2, 2));
        assert!((&id.chi - ProcessMatrix::identity().chi).norm() < 1e-12);
    }

    #[test]
    fn leakage_is_reported() {
        let pops = [0.5, 0.4, 0.1];
        let rho = DensityMatrix::from_populations(&pops, Space::new(vec![3])).unwrap();
        let (block, leak) = project_qubits(&rho).unwrap();
        assert!((leak - 0.1).abs() < 1e-12);
        assert!((block[(0, 0)].re - 0.5 / 0.9).abs() < 1e-12);
    }
}
