//! Closed-system timing calibration in the single-excitation manifold
//! spanned by `|A>`, `|c>` and `|B>`.

use crate::linalg::{hermitian_expm, DMat, C64, I, ZERO};
use serde::{Deserialize, Serialize};

/// Which couplings are on during a stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CouplingPattern {
    A,
    B,
    AB,
}

impl CouplingPattern {
    pub const ALL: [CouplingPattern; 3] = [CouplingPattern::A, CouplingPattern::B, CouplingPattern::AB];

    pub fn couplings(self, g_a: f64, g_b: f64) -> (f64, f64) {
        match self {
            CouplingPattern::A => (g_a, 0.0),
            CouplingPattern::B => (0.0, g_b),
            CouplingPattern::AB => (g_a, g_b),
        }
    }
}

/// `exp(-i H t)` on `(|A>, |c>, |B>)` with resonant exchange couplings.
pub fn single_excitation_propagator(g_a: f64, g_b: f64, t: f64) -> DMat {
    let g = |v: f64| C64::new(v, 0.0);
    let h = DMat::from_row_slice(3, 3, &[ZERO, g(g_a), ZERO, g(g_a), ZERO, g(g_b), ZERO, g(g_b), ZERO]);
    hermitian_expm(&h, -I * t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferTiming {
    /// Time of the first maximum of the A-to-B transfer probability, s.
    pub t_star: f64,
    /// `<B| U(t_star) |A>`.
    pub amplitude_re: f64,
    pub amplitude_im: f64,
}

impl TransferTiming {
    pub fn amplitude(&self) -> C64 {
        C64::new(self.amplitude_re, self.amplitude_im)
    }

    /// Virtual-Z angle on the receiver that removes the transfer phase.
    pub fn phase(&self) -> f64 {
        self.amplitude().arg()
    }
}

/// Locates the first maximum of `|<B|U(t)|A>|^2` by a coarse scan over one
/// exchange period followed by golden-section refinement.
pub fn transfer_timing(g_a: f64, g_b: f64) -> TransferTiming {
    let omega = (g_a * g_a + g_b * g_b).sqrt();
    let period = 2.0 * std::f64::consts::PI / omega;
    let prob = |t: f64| single_excitation_propagator(g_a, g_b, t)[(2, 0)].norm_sqr();
    let n = 2000;
    let (mut best_t, mut best) = (0.0, -1.0);
    for k in 1..=n {
        let t = period * k as f64 / n as f64;
        let p = prob(t);
        if p > best + 1e-12 {
            best = p;
            best_t = t;
        }
    }
    let h = period / n as f64;
    let (mut a, mut b) = (best_t - h, best_t + h);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut d) = (b - r * (b - a), a + r * (b - a));
    let (mut fc, mut fd) = (prob(c), prob(d));
    while b - a > 1e-16 + 1e-12 * best_t {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = prob(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = prob(d);
        }
    }
    let t_star = 0.5 * (a + b);
    let amp = single_excitation_propagator(g_a, g_b, t_star)[(2, 0)];
    TransferTiming {
        t_star,
        amplitude_re: amp.re,
        amplitude_im: amp.im,
    }
}

/// Two-stage schedule that turns `|A>` into an equal superposition of
/// `|A>` and `|B>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellTiming {
    pub first: CouplingPattern,
    pub first_duration: f64,
    pub second: CouplingPattern,
    pub second_duration: f64,
    /// Closed-system fidelity with the local phase removed.
    pub fidelity: f64,
    /// `arg <B|psi> - arg <A|psi>`; a virtual Z by this angle on B aligns
    /// the two components.
    pub phase: f64,
}

impl BellTiming {
    pub fn total(&self) -> f64 {
        self.first_duration + self.second_duration
    }

    /// Evaluates a given pair of stages.
    pub fn evaluate(g_a: f64, g_b: f64, first: (CouplingPattern, f64), second: (CouplingPattern, f64)) -> Self {
        let (a1, b1) = first.0.couplings(g_a, g_b);
        let (a2, b2) = second.0.couplings(g_a, g_b);
        let u = single_excitation_propagator(a2, b2, second.1) * single_excitation_propagator(a1, b1, first.1);
        let (amp_a, amp_b) = (u[(0, 0)], u[(2, 0)]);
        BellTiming {
            first: first.0,
            first_duration: first.1,
            second: second.0,
            second_duration: second.1,
            fidelity: (amp_a.norm() + amp_b.norm()).powi(2) / 2.0,
            phase: amp_b.arg() - amp_a.arg(),
        }
    }
}

/// Grid search over stage patterns and durations (step `grid`, up to
/// `max_stage` each). Returns the shortest schedule whose fidelity reaches
/// `threshold`, ties broken by fidelity; if none does, the best found.
pub fn bell_timing(g_a: f64, g_b: f64, grid: f64, max_stage: f64, threshold: f64) -> BellTiming {
    let steps = (max_stage / grid).round() as usize;
    let mut best: Option<BellTiming> = None;
    let mut best_any: Option<BellTiming> = None;
    let tables: Vec<Vec<DMat>> = CouplingPattern::ALL
        .iter()
        .map(|p| {
            let (a, b) = p.couplings(g_a, g_b);
            (0..=steps)
                .map(|k| single_excitation_propagator(a, b, k as f64 * grid))
                .collect()
        })
        .collect();
    for (i1, &p1) in CouplingPattern::ALL.iter().enumerate() {
        for (i2, &p2) in CouplingPattern::ALL.iter().enumerate() {
            for k1 in 0..=steps {
                let col: Vec<C64> = (0..3).map(|r| tables[i1][k1][(r, 0)]).collect();
                for k2 in 0..=steps {
                    let u2 = &tables[i2][k2];
                    let amp = |row: usize| (0..3).map(|k| u2[(row, k)] * col[k]).sum::<C64>();
                    let (amp_a, amp_b) = (amp(0), amp(2));
                    let fidelity = (amp_a.norm() + amp_b.norm()).powi(2) / 2.0;
                    let cand = BellTiming {
                        first: p1,
                        first_duration: k1 as f64 * grid,
                        second: p2,
                        second_duration: k2 as f64 * grid,
                        fidelity,
                        phase: amp_b.arg() - amp_a.arg(),
                    };
                    if best_any.is_none_or(|b| cand.fidelity > b.fidelity) {
                        best_any = Some(cand);
                    }
                    if fidelity >= threshold {
                        let better = match best {
                            None => true,
                            Some(b) => {
                                let (tc, tb) = (k1 + k2, ((b.total()) / grid).round() as usize);
                                tc < tb || (tc == tb && fidelity > b.fidelity)
                            }
                        };
                        if better {
                            best = Some(cand);
                        }
                    }
                }
            }
        }
    }
    best.or(best_any).expect("grid is non-empty")
}
