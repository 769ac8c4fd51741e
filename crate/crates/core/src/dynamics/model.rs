use crate::error::{Error, Result};
use crate::linalg::{SparseMatrix, C64};
use serde::{Deserialize, Serialize};

/// Duffing qubit truncated to `levels` states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitParams {
    pub frequency: f64,
    /// rad/s, negative for a transmon.
    pub anharmonicity: f64,
    pub levels: usize,
    /// Energy relaxation rate to the qubit's own bath, 1/s.
    pub kappa: f64,
    pub occupancy: f64,
    /// Pure dephasing rate, 1/s.
    pub dephasing: f64,
}

impl QubitParams {
    pub const DEFAULT_LEVELS: usize = 5;

    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 {
            return Err(Error::invalid("levels", "a qubit needs at least 2 levels"));
        }
        non_negative_rate("qubit.kappa", self.kappa)?;
        non_negative_rate("qubit.dephasing", self.dephasing)?;
        if !(self.occupancy >= 0.0 && self.occupancy.is_finite()) {
            return Err(Error::invalid("occupancy", format!("must be >= 0, got {}", self.occupancy)));
        }
        Ok(())
    }
}

/// Single bosonic mode with its (possibly merged) bath.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeParams {
    pub frequency: f64,
    pub fock_cutoff: usize,
    pub kappa: f64,
    pub occupancy: f64,
}

impl ModeParams {
    /// A mode whose cutoff follows [`fock_cutoff_for`] its bath occupancy.
    pub fn with_auto_cutoff(frequency: f64, bath: Bath) -> Self {
        Self {
            frequency,
            fock_cutoff: fock_cutoff_for(bath.occupancy),
            kappa: bath.kappa,
            occupancy: bath.occupancy,
        }
    }

    pub fn bath(&self) -> Bath {
        Bath {
            kappa: self.kappa,
            occupancy: self.occupancy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fock_cutoff < 2 {
            return Err(Error::invalid("fock_cutoff", "must be at least 2"));
        }
        non_negative_rate("mode.kappa", self.kappa)?;
        if !(self.occupancy >= 0.0 && self.occupancy.is_finite()) {
            return Err(Error::invalid("occupancy", format!("must be >= 0, got {}", self.occupancy)));
        }
        Ok(())
    }

    /// Thermal weight beyond the cutoff, `(N/(N+1))^N_max`.
    pub fn truncated_tail(&self) -> f64 {
        (self.occupancy / (self.occupancy + 1.0)).powi(self.fock_cutoff as i32)
    }
}

/// Smallest cutoff whose geometric tail at occupancy `n` is below 1e-3,
/// never less than 10.
pub fn fock_cutoff_for(n: f64) -> usize {
    const FLOOR: usize = 10;
    if n <= 0.0 {
        return FLOOR;
    }
    let ratio = n / (n + 1.0);
    let needed = (1e-3f64.ln() / ratio.ln()).ceil() as usize;
    needed.max(FLOOR)
}

/// Exchange couplings of qubit A and qubit B to the mode, rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Coupling {
    pub g_a: f64,
    pub g_b: f64,
}

impl Coupling {
    pub fn new(g_a: f64, g_b: f64) -> Self {
        Self { g_a, g_b }
    }

    pub fn for_qubit(&self, q: usize) -> f64 {
        if q == 0 {
            self.g_a
        } else {
            self.g_b
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bath {
    pub kappa: f64,
    pub occupancy: f64,
}

/// Combines baths acting on the same element into one effective bath.
pub fn merge_baths(baths: &[Bath]) -> Result<Bath> {
    if baths.is_empty() {
        return Err(Error::invalid("baths", "at least one bath is required"));
    }
    for b in baths {
        non_negative_rate("bath.kappa", b.kappa)?;
        if !(b.occupancy >= 0.0) {
            return Err(Error::invalid("occupancy", format!("must be >= 0, got {}", b.occupancy)));
        }
    }
    let kappa: f64 = baths.iter().map(|b| b.kappa).sum();
    if kappa == 0.0 {
        return Err(Error::UndefinedOccupancy);
    }
    let weighted: f64 = baths.iter().map(|b| b.kappa * b.occupancy).sum();
    Ok(Bath {
        kappa,
        occupancy: weighted / kappa,
    })
}

/// Subsystem dimensions in tensor order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Space {
    pub dims: Vec<usize>,
}

impl Space {
    pub fn new(dims: Vec<usize>) -> Self {
        Self { dims }
    }

    pub fn of(qubits: &[QubitParams], mode: Option<&ModeParams>) -> Self {
        let mut dims: Vec<usize> = qubits.iter().map(|q| q.levels).collect();
        if let Some(m) = mode {
            dims.push(m.fock_cutoff);
        }
        Self { dims }
    }

    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    /// Flat index of a product basis state.
    pub fn index(&self, digits: &[usize]) -> usize {
        digits.iter().zip(&self.dims).fold(0, |acc, (&d, &n)| acc * n + d)
    }

    /// Per-subsystem quantum numbers of a flat index.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (slot, &n) in out.iter_mut().zip(&self.dims).rev() {
            *slot = index % n;
            index /= n;
        }
        out
    }
}

/// Bosonic lowering operator with `sqrt(n)` matrix elements.
pub fn ladder(levels: usize) -> SparseMatrix {
    SparseMatrix::from_triplets(
        levels,
        levels,
        (1..levels).map(|n| (n - 1, n, C64::new((n as f64).sqrt(), 0.0))),
    )
}

pub fn number(levels: usize) -> SparseMatrix {
    SparseMatrix::from_diagonal(&(0..levels).map(|n| C64::new(n as f64, 0.0)).collect::<Vec<_>>())
}

/// Lifts a single-site operator into the full space.
pub fn embed(local: &SparseMatrix, site: usize, space: &Space) -> SparseMatrix {
    let mut out = SparseMatrix::identity(1);
    for (k, &n) in space.dims.iter().enumerate() {
        let factor = if k == site {
            local.clone()
        } else {
            SparseMatrix::identity(n)
        };
        out = out.kron(&factor);
    }
    out
}

fn check_coupling(qubits: &[QubitParams], mode: Option<&ModeParams>, coupling: &Coupling) -> Result<()> {
    let mut freqs: Vec<f64> = qubits.iter().map(|q| q.frequency).collect();
    if let Some(m) = mode {
        freqs.push(m.frequency);
    }
    let min_freq = freqs.iter().copied().fold(f64::INFINITY, f64::min);
    for (q, _) in qubits.iter().enumerate() {
        let g = coupling.for_qubit(q);
        if !g.is_finite() || (min_freq > 0.0 && g.abs() >= 0.1 * min_freq) {
            return Err(Error::invalid("coupling", format!("|g| = {g} must be below 0.1 min(omega)")));
        }
    }
    if qubits.len() > 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: qubits.len(),
        });
    }
    Ok(())
}

/// `H / hbar` in the frame rotating at `frame` (rad/s).
pub fn build_hamiltonian(
    qubits: &[QubitParams],
    mode: Option<&ModeParams>,
    coupling: &Coupling,
    frame: f64,
) -> Result<SparseMatrix> {
    for q in qubits {
        q.validate()?;
    }
    if let Some(m) = mode {
        m.validate()?;
    }
    check_coupling(qubits, mode, coupling)?;
    let space = Space::of(qubits, mode);
    let dim = space.total();
    let mut h = SparseMatrix::zeros(dim, dim);
    let mode_site = qubits.len();
    for (site, q) in qubits.iter().enumerate() {
        let b = ladder(q.levels);
        let n = number(q.levels);
        let bd = b.adjoint();
        let duffing = bd.matmul(&bd).matmul(&b).matmul(&b).scale_real(q.anharmonicity / 2.0);
        let local = n.scale_real(q.frequency - frame).add(&duffing);
        h = h.add(&embed(&local, site, &space));
        if let Some(m) = mode {
            let g = coupling.for_qubit(site);
            if g != 0.0 {
                let sb = embed(&b, site, &space);
                let a = embed(&ladder(m.fock_cutoff), mode_site, &space);
                let exchange = sb.adjoint().matmul(&a).add(&sb.matmul(&a.adjoint()));
                h = h.add(&exchange.scale_real(g));
            }
        }
    }
    if let Some(m) = mode {
        h = h.add(&embed(&number(m.fock_cutoff).scale_real(m.frequency - frame), mode_site, &space));
    }
    Ok(h)
}

/// A jump operator and its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct CollapseOp {
    pub label: String,
    pub op: SparseMatrix,
}

/// Thermal relaxation, excitation and dephasing operators; zero-rate
/// channels are omitted.
pub fn build_collapse_operators(qubits: &[QubitParams], mode: Option<&ModeParams>) -> Result<Vec<CollapseOp>> {
    let space = Space::of(qubits, mode);
    let names = ["A", "B"];
    let mut out = Vec::new();
    let mut push = |label: String, rate: f64, op: SparseMatrix| -> Result<()> {
        if rate < 0.0 || !rate.is_finite() {
            return Err(Error::NegativeRate { name: label, value: rate });
        }
        if rate > 0.0 {
            out.push(CollapseOp {
                label,
                op: op.scale_real(rate.sqrt()),
            });
        }
        Ok(())
    };
    for (site, q) in qubits.iter().enumerate() {
        let name = names.get(site).copied().unwrap_or("Q");
        let b = embed(&ladder(q.levels), site, &space);
        push(format!("dephase_{name}"), q.dephasing / 2.0, embed(&number(q.levels), site, &space))?;
        push(format!("down_{name}"), q.kappa * (q.occupancy + 1.0), b.clone())?;
        push(format!("up_{name}"), q.kappa * q.occupancy, b.adjoint())?;
    }
    if let Some(m) = mode {
        let a = embed(&ladder(m.fock_cutoff), qubits.len(), &space);
        push("down_c".into(), m.kappa * (m.occupancy + 1.0), a.clone())?;
        push("up_c".into(), m.kappa * m.occupancy, a.adjoint())?;
    }
    Ok(out)
}

fn non_negative_rate(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::NegativeRate {
            name: name.to_string(),
            value: v,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_eigenvalues;
    use crate::units::{ghz, mhz, NS, US};

    fn qubit(levels: usize) -> QubitParams {
        QubitParams {
            frequency: ghz(7.48),
            anharmonicity: mhz(-204.0),
            levels,
            kappa: 1.0 / (1.08 * US),
            occupancy: 0.52,
            dephasing: 0.0,
        }
    }

    fn mode(cutoff: usize) -> ModeParams {
        ModeParams {
            frequency: ghz(7.48),
            fock_cutoff: cutoff,
            kappa: 1.0 / (820.0 * NS),
            occupancy: 0.0,
        }
    }

    #[test]
    fn cutoff_rule() {
        // ln(1e-3)/ln(5.64/6.64) = 42.3
        assert_eq!(fock_cutoff_for(5.64), 43);
        assert_eq!(fock_cutoff_for(0.06), 10);
        assert_eq!(fock_cutoff_for(0.0), 10);
        let m = ModeParams::with_auto_cutoff(1.0, Bath { kappa: 1.0, occupancy: 5.64 });
        assert!(m.truncated_tail() < 1e-3);
    }

    #[test]
    fn merge_examples() {
        let single = Bath { kappa: 2.0, occupancy: 0.3 };
        assert_eq!(merge_baths(&[single]).unwrap(), single);
        let sym = merge_baths(&[Bath { kappa: 1.0, occupancy: 1.0 }, Bath { kappa: 1.0, occupancy: 3.0 }]).unwrap();
        assert!((sym.occupancy - 2.0).abs() < 1e-15);
        let cooled = merge_baths(&[
            Bath { kappa: 1.0 / (820.0 * NS), occupancy: 5.0 },
            Bath { kappa: 1.0 / (9.6 * NS), occupancy: 0.0 },
        ])
        .unwrap();
        assert!((cooled.occupancy - 5.0 / (1.0 + 820.0 / 9.6)).abs() < 1e-12);
        assert!(matches!(
            merge_baths(&[Bath { kappa: 0.0, occupancy: 1.0 }]),
            Err(Error::UndefinedOccupancy)
        ));
    }

    #[test]
    fn resonant_uncoupled_hamiltonian_is_duffing_only() {
        let q = qubit(3);
        let h = build_hamiltonian(&[q], Some(&mode(4)), &Coupling::default(), ghz(7.48)).unwrap();
        assert_eq!(h.row(0).count(), 0);
        // |2> sits at eta; everything else is degenerate at 0.
        let space = Space::of(&[q], Some(&mode(4)));
        let idx = space.index(&[2, 1]);
        assert!((h.get(idx, idx).re - mhz(-204.0)).abs() < 1e-3);
        assert!(h.hermitian_deviation() == 0.0);
    }

    #[test]
    fn jaynes_cummings_doublet_splitting() {
        let mut q = qubit(2);
        q.anharmonicity = 0.0;
        let g = mhz(5.0);
        let h = build_hamiltonian(&[q], Some(&mode(3)), &Coupling::new(g, 0.0), ghz(7.48)).unwrap();
        let space = Space::of(&[q], Some(&mode(3)));
        let (e, g1) = (space.index(&[1, 0]), space.index(&[0, 1]));
        let block = nalgebra::DMatrix::from_fn(2, 2, |r, c| {
            let ids = [e, g1];
            h.get(ids[r], ids[c])
        });
        let ev = hermitian_eigenvalues(&block);
        assert!(((ev[1] - ev[0]) - 2.0 * g).abs() < 1e-6);
    }

    #[test]
    fn qubit_b_detuning_in_mode_frame() {
        let mut qa = qubit(3);
        qa.frequency = ghz(7.429);
        let mut qb = qubit(3);
        qb.frequency = ghz(7.538);
        let m = mode(3);
        let h = build_hamiltonian(&[qa, qb], Some(&m), &Coupling::default(), m.frequency).unwrap();
        let space = Space::of(&[qa, qb], Some(&m));
        let i = space.index(&[0, 1, 0]);
        assert!((h.get(i, i).re - 2.0 * std::f64::consts::PI * 0.058e9).abs() < 1.0);
    }

    #[test]
    fn collapse_rates_follow_detailed_balance() {
        let q = qubit(3);
        let ops = build_collapse_operators(&[q], None).unwrap();
        assert_eq!(ops.len(), 2);
        let down = ops.iter().find(|o| o.label == "down_A").unwrap();
        let up = ops.iter().find(|o| o.label == "up_A").unwrap();
        let rate_down = down.op.get(0, 1).norm_sqr();
        let rate_up = up.op.get(1, 0).norm_sqr();
        assert!((rate_down * US - 1.52 / 1.08).abs() < 1e-9);
        assert!((rate_up * US - 0.52 / 1.08).abs() < 1e-9);
        assert!((rate_down * US - 1.407).abs() < 1e-3);
        assert!((rate_up * US - 0.481).abs() < 1e-3);
    }

    #[test]
    fn zero_occupancy_has_only_lowering() {
        let mut q = qubit(3);
        q.occupancy = 0.0;
        let ops = build_collapse_operators(&[q], Some(&mode(3))).unwrap();
        assert!(ops.iter().all(|o| o.label.starts_with("down")));
        q.kappa = -1.0;
        assert!(build_collapse_operators(&[q], None).is_err());
    }

    #[test]
    fn space_index_round_trip() {
        let s = Space::new(vec![3, 4, 5]);
        for i in 0..s.total() {
            assert_eq!(s.index(&s.digits(i)), i);
        }
    }
}
