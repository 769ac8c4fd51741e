use super::model::{CollapseOp, Coupling, ModeParams, QubitParams, Space};
use super::state::DensityMatrix;
use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, reverse_cuthill_mckee, BandedLu, DMat, SparseMatrix, C64, I, ZERO};
use std::collections::{HashMap, VecDeque};

const MAX_DT: f64 = 0.05e-9;
const TRACE_RENORM_LIMIT: f64 = 1e-6;
const NEGATIVITY_LIMIT: f64 = -1e-5;
const HERMITICITY_LIMIT: f64 = 1e-8;
const RK4_STABILITY: f64 = 2.78;
/// Steady state is declared once `max |d rho / dt|` falls below this, per ns.
const STEADY_DERIVATIVE_PER_NS: f64 = 1e-10;

/// Fixed RK4 step: at most 0.05 ns, and small against the fastest detuning,
/// coupling or thermal rate.
pub fn default_time_step(qubits: &[QubitParams], mode: Option<&ModeParams>, coupling: &Coupling, frame: f64) -> f64 {
    let mut scale: f64 = 0.0;
    for (k, q) in qubits.iter().enumerate() {
        scale = scale
            .max((q.frequency - frame).abs())
            .max(coupling.for_qubit(k).abs())
            .max(q.kappa * (q.occupancy + 1.0));
    }
    if let Some(m) = mode {
        scale = scale.max((m.frequency - frame).abs()).max(m.kappa * (m.occupancy + 1.0));
    }
    if scale > 0.0 {
        MAX_DT.min(0.02 / scale)
    } else {
        MAX_DT
    }
}

/// Master-equation generator `L rho = K rho + rho K^dagger + sum_j L_j rho L_j^dagger`
/// with `K = -iH - 1/2 sum_j L_j^dagger L_j`.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    dim: usize,
    k_t: SparseMatrix,
    ops_t: Vec<SparseMatrix>,
}

impl Liouvillian {
    pub fn new(h: &SparseMatrix, collapse: &[CollapseOp]) -> Result<Self> {
        let ops: Vec<SparseMatrix> = collapse.iter().map(|c| c.op.clone()).collect();
        Self::from_operators(h, &ops)
    }

    pub fn from_operators(h: &SparseMatrix, ops: &[SparseMatrix]) -> Result<Self> {
        let dim = h.nrows();
        if h.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: h.ncols(),
            });
        }
        let deviation = h.hermitian_deviation();
        if deviation > 1e-9 * h.gershgorin_bound().max(1.0) {
            return Err(Error::NonHermitian { deviation });
        }
        let mut k = h.scale(-I);
        for l in ops {
            if l.nrows() != dim || l.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: l.nrows(),
                });
            }
            k = k.sub(&l.adjoint().matmul(l).scale_real(0.5));
        }
        Ok(Self {
            dim,
            k_t: k.transpose(),
            ops_t: ops.iter().map(SparseMatrix::transpose).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Every `(target, source, coefficient)` contribution of element `(k, l)`.
    fn for_each_target(&self, k: usize, l: usize, mut f: impl FnMut(usize, usize, C64)) {
        for (i, kik) in self.k_t.row(k) {
            f(i, l, kik);
        }
        for (j, kjl) in self.k_t.row(l) {
            f(k, j, kjl.conj());
        }
        for lt in &self.ops_t {
            for (i, lik) in lt.row(k) {
                for (j, ljl) in lt.row(l) {
                    f(i, j, lik * ljl.conj());
                }
            }
        }
    }

    /// Restriction to the smallest set of matrix elements that contains
    /// `seed` and is closed under the generator.
    pub fn restrict(&self, seed: impl IntoIterator<Item = (usize, usize)>) -> Restricted {
        let d = self.dim;
        let mut lookup = Lookup::new(d);
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        let mut queue = VecDeque::new();
        for (i, j) in seed {
            for p in [(i, j), (j, i)] {
                if lookup.insert(p, pairs.len()) {
                    pairs.push(p);
                    queue.push_back(p);
                }
            }
        }
        while let Some((k, l)) = queue.pop_front() {
            self.for_each_target(k, l, |i, j, _| {
                if lookup.insert((i, j), pairs.len()) {
                    pairs.push((i, j));
                    queue.push_back((i, j));
                }
            });
        }
        let mut triplets = Vec::new();
        for (src, &(k, l)) in pairs.iter().enumerate() {
            self.for_each_target(k, l, |i, j, c| {
                let tgt = lookup.get((i, j)).expect("closure contains every target");
                triplets.push((tgt, src, c));
            });
        }
        let n = pairs.len();
        Restricted {
            dim: d,
            m: SparseMatrix::from_triplets(n, n, triplets),
            pairs,
            lookup,
        }
    }
}

#[derive(Debug, Clone)]
enum Lookup {
    Dense(Vec<u32>, usize),
    Sparse(HashMap<(usize, usize), usize>),
}

impl Lookup {
    fn new(d: usize) -> Self {
        if d * d <= 1 << 24 {
            Lookup::Dense(vec![u32::MAX; d * d], d)
        } else {
            Lookup::Sparse(HashMap::new())
        }
    }

    fn get(&self, (i, j): (usize, usize)) -> Option<usize> {
        match self {
            Lookup::Dense(v, d) => {
                let x = v[i * d + j];
                (x != u32::MAX).then_some(x as usize)
            }
            Lookup::Sparse(m) => m.get(&(i, j)).copied(),
        }
    }

    /// Returns true when the pair was new.
    fn insert(&mut self, (i, j): (usize, usize), idx: usize) -> bool {
        match self {
            Lookup::Dense(v, d) => {
                let slot = &mut v[i * *d + j];
                if *slot == u32::MAX {
                    *slot = idx as u32;
                    true
                } else {
                    false
                }
            }
            Lookup::Sparse(m) => {
                if m.contains_key(&(i, j)) {
                    false
                } else {
                    m.insert((i, j), idx);
                    true
                }
            }
        }
    }
}

/// The generator acting on an invariant set of density-matrix elements.
#[derive(Debug, Clone)]
pub struct Restricted {
    dim: usize,
    pairs: Vec<(usize, usize)>,
    lookup: Lookup,
    m: SparseMatrix,
}

impl Restricted {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.m
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Gathers the elements of `rho`; fails if `rho` has weight outside the set.
    pub fn gather(&self, rho: &DMat) -> Result<Vec<C64>> {
        let mut outside = 0.0f64;
        let mut total = 0.0f64;
        for i in 0..rho.nrows() {
            for j in 0..rho.ncols() {
                let w = rho[(i, j)].norm_sqr();
                total += w;
                if w > 0.0 && self.lookup.get((i, j)).is_none() {
                    outside += w;
                }
            }
        }
        if outside > 1e-24 * total.max(1.0) {
            return Err(Error::InvalidState("state has support outside the invariant subspace".into()));
        }
        Ok(self.pairs.iter().map(|&(i, j)| rho[(i, j)]).collect())
    }

    pub fn scatter(&self, x: &[C64]) -> DMat {
        let mut out = DMat::zeros(self.dim, self.dim);
        for (&(i, j), &v) in self.pairs.iter().zip(x) {
            out[(i, j)] = v;
        }
        out
    }

    fn diagonal_positions(&self) -> Vec<usize> {
        (0..self.pairs.len()).filter(|&p| self.pairs[p].0 == self.pairs[p].1).collect()
    }

    fn mirror(&self) -> Vec<usize> {
        self.pairs
            .iter()
            .map(|&(i, j)| self.lookup.get((j, i)).expect("support is symmetric"))
            .collect()
    }

    /// Basis indices grouped by connected blocks of the support.
    fn blocks(&self) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..self.dim).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut used = vec![false; self.dim];
        for &(i, j) in &self.pairs {
            used[i] = true;
            used[j] = true;
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                parent[a] = b;
            }
        }
        let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
        for v in 0..self.dim {
            if used[v] {
                let r = find(&mut parent, v);
                groups.entry(r).or_default().push(v);
            }
        }
        let mut out: Vec<Vec<usize>> = groups.into_values().collect();
        out.sort();
        out
    }
}

/// A state held as the elements of a [`Restricted`] subspace.
pub struct SubspaceState<'a> {
    restricted: &'a Restricted,
    x: &'a [C64],
    space: &'a Space,
}

impl SubspaceState<'_> {
    /// `Tr(rho O)`, real part.
    pub fn expectation(&self, observable: &SparseMatrix) -> f64 {
        let mut acc = ZERO;
        for (r, c, v) in observable.triplets() {
            if let Some(p) = self.restricted.lookup.get((c, r)) {
                acc += v * self.x[p];
            }
        }
        acc.re
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix::unchecked(self.restricted.scatter(self.x), self.space.clone())
            .expect("restricted state matches its space")
    }
}

/// Sampled states of an evolution.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

/// Integrates the master equation and returns every sampled state.
/// `sample_interval` is rounded to a whole number of steps.
pub fn evolve(
    rho0: &DensityMatrix,
    h: &SparseMatrix,
    collapse: &[CollapseOp],
    duration: f64,
    dt: f64,
    sample_interval: f64,
) -> Result<Trajectory> {
    let liouvillian = Liouvillian::new(h, collapse)?;
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
    };
    evolve_with(rho0, &liouvillian, duration, dt, sample_interval, |t, s| {
        traj.times.push(t);
        traj.states.push(s.to_density());
        Ok(())
    })?;
    Ok(traj)
}

/// Fixed-step RK4 on the invariant subspace of `rho0`. The observer sees
/// every sample (including `t = 0` and the end); each sample is checked for
/// trace drift, Hermiticity and positivity first.
pub fn evolve_with(
    rho0: &DensityMatrix,
    liouvillian: &Liouvillian,
    duration: f64,
    dt: f64,
    sample_interval: f64,
    mut observer: impl FnMut(f64, &SubspaceState) -> Result<()>,
) -> Result<DensityMatrix> {
    if rho0.dim() != liouvillian.dim() {
        return Err(Error::DimensionMismatch {
            expected: liouvillian.dim(),
            found: rho0.dim(),
        });
    }
    if !(duration >= 0.0) || !(dt > 0.0) {
        return Err(Error::invalid("duration", format!("need duration >= 0 and dt > 0, got {duration}, {dt}")));
    }
    let rho = rho0.matrix();
    let seed = support(rho);
    let restricted = liouvillian.restrict(seed);
    let mut x = restricted.gather(rho)?;
    let space = rho0.space().clone();

    let steps = (duration / dt).ceil() as usize;
    let h = if steps > 0 { duration / steps as f64 } else { 0.0 };
    let stride = if sample_interval > 0.0 && h > 0.0 {
        ((sample_interval / h).round() as usize).max(1)
    } else {
        steps.max(1)
    };
    let bound = restricted.m.gershgorin_bound();
    if h * bound > RK4_STABILITY && bound.is_finite() {
        let exact = spectral_radius_estimate(&restricted.m);
        if h * exact > RK4_STABILITY {
            return Err(Error::StepSize {
                time: 0.0,
                dt: h,
                diagnostic: format!("dt * spectral radius = {:.3} exceeds the RK4 stability bound", h * exact),
            });
        }
    }

    let checker = Checker::new(&restricted);
    checker.check(&mut x, 0.0, h)?;
    observer(
        0.0,
        &SubspaceState {
            restricted: &restricted,
            x: &x,
            space: &space,
        },
    )?;
    let n = x.len();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![ZERO; n], vec![ZERO; n], vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]);
    for step in 1..=steps {
        let m = &restricted.m;
        m.mul_vec(&x, &mut k1);
        axpy_into(&x, 0.5 * h, &k1, &mut tmp);
        m.mul_vec(&tmp, &mut k2);
        axpy_into(&x, 0.5 * h, &k2, &mut tmp);
        m.mul_vec(&tmp, &mut k3);
        axpy_into(&x, h, &k3, &mut tmp);
        m.mul_vec(&tmp, &mut k4);
        let c = h / 6.0;
        for i in 0..n {
            x[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * c;
        }
        if step % stride == 0 || step == steps {
            let t = step as f64 * h;
            checker.check(&mut x, t, h)?;
            observer(
                t,
                &SubspaceState {
                    restricted: &restricted,
                    x: &x,
                    space: &space,
                },
            )?;
        }
    }
    let out = DensityMatrix::unchecked(restricted.scatter(&x), space)?;
    Ok(out)
}

fn axpy_into(x: &[C64], a: f64, y: &[C64], out: &mut [C64]) {
    for ((o, xi), yi) in out.iter_mut().zip(x).zip(y) {
        *o = xi + yi * a;
    }
}

fn support(rho: &DMat) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..rho.nrows() {
        for j in 0..rho.ncols() {
            if rho[(i, j)] != ZERO {
                out.push((i, j));
            }
        }
    }
    out
}

/// Power-iteration estimate of the largest eigenvalue modulus.
fn spectral_radius_estimate(m: &SparseMatrix) -> f64 {
    let n = m.nrows();
    let mut v: Vec<C64> = (0..n).map(|i| C64::new(1.0 + (i % 7) as f64 * 0.1, (i % 3) as f64 * 0.1)).collect();
    let mut w = vec![ZERO; n];
    let mut est = 0.0;
    for _ in 0..60 {
        let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|c| *c /= norm);
        m.mul_vec(&v, &mut w);
        est = w.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        std::mem::swap(&mut v, &mut w);
    }
    est
}

struct Checker {
    diag: Vec<usize>,
    mirror: Vec<usize>,
    blocks: Vec<Vec<usize>>,
    lookup: Lookup,
}

impl Checker {
    fn new(r: &Restricted) -> Self {
        Self {
            diag: r.diagonal_positions(),
            mirror: r.mirror(),
            blocks: r.blocks(),
            lookup: r.lookup.clone(),
        }
    }

    fn check(&self, x: &mut [C64], time: f64, dt: f64) -> Result<()> {
        let trace: C64 = self.diag.iter().map(|&p| x[p]).sum();
        let drift = (trace - C64::new(1.0, 0.0)).norm();
        if drift > TRACE_RENORM_LIMIT || !drift.is_finite() {
            return Err(Error::StepSize {
                time,
                dt,
                diagnostic: format!("trace drifted to {trace}"),
            });
        }
        let mut herm = 0.0f64;
        for (p, &q) in self.mirror.iter().enumerate() {
            herm = herm.max((x[p] - x[q].conj()).norm());
        }
        if herm > HERMITICITY_LIMIT {
            return Err(Error::StepSize {
                time,
                dt,
                diagnostic: format!("Hermiticity lost (deviation {herm:e})"),
            });
        }
        for (p, &q) in self.mirror.iter().enumerate() {
            if p < q {
                let avg = 0.5 * (x[p] + x[q].conj());
                x[p] = avg;
                x[q] = avg.conj();
            } else if p == q {
                x[p] = C64::new(x[p].re, 0.0);
            }
        }
        let tr = trace.re;
        if drift > 0.0 {
            x.iter_mut().for_each(|v| *v /= tr);
        }
        for block in &self.blocks {
            let n = block.len();
            let sub = DMat::from_fn(n, n, |r, c| {
                self.lookup
                    .get((block[r], block[c]))
                    .map(|p| x[p])
                    .unwrap_or(ZERO)
            });
            let min = if n == 1 { sub[(0, 0)].re } else { min_eigenvalue(&sub) };
            if min < NEGATIVITY_LIMIT {
                return Err(Error::StepSize {
                    time,
                    dt,
                    diagnostic: format!("negative eigenvalue {min:e}"),
                });
            }
        }
        Ok(())
    }
}

/// How a steady state was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteadyMethod {
    /// Direct solve of the generator's null space.
    NullSpace,
    /// Long-time integration.
    Evolution,
}

#[derive(Debug, Clone)]
pub struct SteadyState {
    pub rho: DensityMatrix,
    pub method: SteadyMethod,
    /// The null space was not one-dimensional; `rho` is the state reached
    /// from the ground state.
    pub degenerate: bool,
    /// `max |L rho|`, 1/s.
    pub residual: f64,
}

fn has_dissipation(collapse: &[CollapseOp]) -> bool {
    collapse.iter().any(|c| c.op.nnz() > 0)
}

/// Null-space steady state reached from the ground state.
///
/// The element `rho_00` is pinned to one in place of its own equation, the
/// resulting sparse system is reordered for a small bandwidth and solved by
/// banded LU, and the result is scaled to unit trace. A singular system falls
/// back to long-time evolution and is flagged as degenerate.
pub fn steady_state(h: &SparseMatrix, collapse: &[CollapseOp], space: &Space) -> Result<SteadyState> {
    if !has_dissipation(collapse) {
        return Err(Error::SteadyState("no dissipator with a positive rate".into()));
    }
    let liouvillian = Liouvillian::new(h, collapse)?;
    check_space(&liouvillian, space)?;
    let restricted = liouvillian.restrict([(0, 0)]);
    let pin = restricted.lookup.get((0, 0)).expect("seed is in the closure");
    let n = restricted.len();
    let a = SparseMatrix::from_triplets(
        n,
        n,
        restricted
            .m
            .triplets()
            .filter(|&(r, _, _)| r != pin)
            .chain(std::iter::once((pin, pin, C64::new(1.0, 0.0)))),
    );
    let direct = (|| -> Option<Vec<C64>> {
        let perm = reverse_cuthill_mckee(&a);
        let lu = BandedLu::factor(&a, &perm).ok()?;
        let mut b = vec![ZERO; n];
        b[pin] = C64::new(1.0, 0.0);
        let x = lu.solve(&b);
        x.iter().all(|v| v.re.is_finite() && v.im.is_finite()).then_some(x)
    })();
    if let Some(mut x) = direct {
        let trace: C64 = restricted.diagonal_positions().iter().map(|&p| x[p]).sum();
        if trace.norm() > 0.0 {
            x.iter_mut().for_each(|v| *v /= trace);
            let residual = max_rate(&restricted.m, &x);
            let scale = restricted.m.gershgorin_bound().max(1.0);
            if residual <= 1e-8 * scale {
                let rho = DensityMatrix::unchecked(hermitize(restricted.scatter(&x)), space.clone())?;
                if rho.validate().is_ok() {
                    return Ok(SteadyState {
                        rho,
                        method: SteadyMethod::NullSpace,
                        degenerate: false,
                        residual,
                    });
                }
            }
        }
    }
    log::warn!("steady state: direct solve failed, falling back to time evolution");
    let mut ss = evolve_to_steady(&liouvillian, space)?;
    ss.degenerate = true;
    Ok(ss)
}

/// Steady state by integrating from the ground state until
/// `max |d rho/dt|` is below 1e-10 per ns.
pub fn steady_state_by_evolution(h: &SparseMatrix, collapse: &[CollapseOp], space: &Space) -> Result<SteadyState> {
    if !has_dissipation(collapse) {
        return Err(Error::SteadyState("no dissipator with a positive rate".into()));
    }
    let liouvillian = Liouvillian::new(h, collapse)?;
    check_space(&liouvillian, space)?;
    evolve_to_steady(&liouvillian, space)
}

fn check_space(l: &Liouvillian, space: &Space) -> Result<()> {
    if space.total() != l.dim() {
        return Err(Error::DimensionMismatch {
            expected: l.dim(),
            found: space.total(),
        });
    }
    Ok(())
}

fn max_rate(m: &SparseMatrix, x: &[C64]) -> f64 {
    let mut y = vec![ZERO; x.len()];
    m.mul_vec(x, &mut y);
    y.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

fn hermitize(m: DMat) -> DMat {
    (&m + m.adjoint()).scale(0.5)
}

fn evolve_to_steady(liouvillian: &Liouvillian, space: &Space) -> Result<SteadyState> {
    let restricted = liouvillian.restrict([(0, 0)]);
    let radius = spectral_radius_estimate(&restricted.m).max(1.0);
    let dt = MAX_DT.min(1.0 / radius);
    let chunk = 20e-9;
    let max_time = 1e-2;
    let mut rho = DensityMatrix::ground(space.clone());
    let mut t = 0.0;
    let threshold = STEADY_DERIVATIVE_PER_NS / 1e-9;
    loop {
        let x = restricted.gather(rho.matrix())?;
        let residual = max_rate(&restricted.m, &x);
        if residual < threshold {
            return Ok(SteadyState {
                rho,
                method: SteadyMethod::Evolution,
                degenerate: false,
                residual,
            });
        }
        if t > max_time {
            return Err(Error::SteadyState(format!(
                "no convergence after {t:e} s (max |d rho/dt| = {residual:e} /s)"
            )));
        }
        rho = evolve_with(&rho, liouvillian, chunk, dt, chunk, |_, _| Ok(()))?;
        t += chunk;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::model::*;
    use crate::dynamics::state::expectation;
    use crate::units::{ghz, mhz, NS, US};
    use std::f64::consts::PI;

    fn qubit(levels: usize, kappa: f64, occupancy: f64) -> QubitParams {
        QubitParams {
            frequency: ghz(7.48),
            anharmonicity: mhz(-204.0),
            levels,
            kappa,
            occupancy,
            dephasing: 0.0,
        }
    }

    fn mode(cutoff: usize, kappa: f64, occupancy: f64) -> ModeParams {
        ModeParams {
            frequency: ghz(7.48),
            fock_cutoff: cutoff,
            kappa,
            occupancy,
        }
    }

    #[test]
    fn vacuum_rabi_closed_system() {
        let q = qubit(2, 0.0, 0.0);
        let m = mode(3, 0.0, 0.0);
        let g = mhz(5.0);
        let c = Coupling::new(g, 0.0);
        let h = build_hamiltonian(&[q], Some(&m), &c, m.frequency).unwrap();
        let space = Space::of(&[q], Some(&m));
        let rho0 = DensityMatrix::basis(&[1, 0], space.clone()).unwrap();
        let dt = default_time_step(&[q], Some(&m), &c, m.frequency);
        let traj = evolve(&rho0, &h, &[], 100.0 * NS, dt, 5.0 * NS).unwrap();
        let pe = embed(&number(2), 0, &space);
        for (t, rho) in traj.times.iter().zip(&traj.states) {
            let p = expectation(rho, &pe).unwrap();
            assert!((p - (g * t).cos().powi(2)).abs() < 1e-8, "t = {t}");
        }
        let half = (PI / (2.0 * g)) / NS;
        assert!((half - 50.0).abs() < 1e-9);
    }

    #[test]
    fn thermalisation_of_a_lone_qubit() {
        let q = qubit(3, 1.0 / (1.08 * US), 0.52);
        let h = build_hamiltonian(&[q], None, &Coupling::default(), q.frequency).unwrap();
        let ops = build_collapse_operators(&[q], None).unwrap();
        let space = Space::of(&[q], None);
        let rho0 = DensityMatrix::ground(space.clone());
        let dt = default_time_step(&[q], None, &Coupling::default(), q.frequency);
        let traj = evolve(&rho0, &h, &ops, 8.0 * US, dt, 100.0 * NS).unwrap();
        let exc = SparseMatrix::from_diagonal(&[ZERO, C64::new(1.0, 0.0), C64::new(1.0, 0.0)]);
        let last = expectation(traj.states.last().unwrap(), &exc).unwrap();
        assert!((0.31..=0.35).contains(&last), "{last}");
        let r = 0.52 / 1.52;
        let geometric = (r + r * r) / (1.0 + r + r * r);
        assert!((last - geometric).abs() < 1e-3);
    }

    #[test]
    fn closure_respects_excitation_structure() {
        let q = qubit(3, 1e6, 0.5);
        let m = mode(4, 1e6, 0.5);
        let c = Coupling::new(mhz(5.0), 0.0);
        let h = build_hamiltonian(&[q], Some(&m), &c, m.frequency).unwrap();
        let ops = build_collapse_operators(&[q], Some(&m)).unwrap();
        let l = Liouvillian::new(&h, &ops).unwrap();
        let r = l.restrict([(0, 0)]);
        let space = Space::of(&[q], Some(&m));
        let exc = |i: usize| space.digits(i).iter().sum::<usize>();
        assert!(r.pairs().iter().all(|&(i, j)| exc(i) == exc(j)));
        assert!(r.len() < space.total() * space.total());
    }

    #[test]
    fn steady_state_requires_dissipation() {
        let q = qubit(2, 0.0, 0.0);
        let h = build_hamiltonian(&[q], None, &Coupling::default(), q.frequency).unwrap();
        let space = Space::of(&[q], None);
        assert!(matches!(steady_state(&h, &[], &space), Err(Error::SteadyState(_))));
    }

    #[test]
    fn oversized_step_is_rejected() {
        let q = qubit(2, 1e9, 1.0);
        let h = build_hamiltonian(&[q], None, &Coupling::default(), q.frequency).unwrap();
        let ops = build_collapse_operators(&[q], None).unwrap();
        let space = Space::of(&[q], None);
        let err = evolve(&DensityMatrix::ground(space), &h, &ops, 1e-6, 1e-8, 1e-7).unwrap_err();
        assert!(matches!(err, Error::StepSize { .. }));
    }
}
