//! A dense two-phase revised simplex solver for small linear programs with
//! box-constrained variables:
//!
//! ```text
//! minimize    c'z
//! subject to  A z = b,    lo <= z <= hi
//! ```
//!
//! The row count is expected to be small (tens); the column count may be a
//! few thousand. The basis inverse is kept explicitly and refactorized
//! periodically. Anti-cycling falls back to Bland's rule after a run of
//! degenerate pivots.

const FEAS_TOL: f64 = 1e-10;
const OPT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;
const BLAND_AFTER: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    IterationLimit,
    Singular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarState {
    Basic,
    AtLower,
    AtUpper,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub z: Vec<f64>,
    pub objective: f64,
    pub state: Vec<VarState>,
    pub iterations: usize,
}

/// Problem data. Columns are stored dense (row count is small).
pub struct BoundedLp {
    pub nrows: usize,
    pub cost: Vec<f64>,
    pub cols: Vec<Vec<f64>>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rhs: Vec<f64>,
}

struct Tableau {
    m: usize,
    basis: Vec<usize>,
    binv: Vec<Vec<f64>>,
    xb: Vec<f64>,
    state: Vec<VarState>,
    value: Vec<f64>,
}

impl BoundedLp {
    pub fn solve(&self, max_iter: usize) -> LpSolution {
        let m = self.nrows;
        let n = self.cols.len();
        debug_assert!(self.cost.len() == n && self.lower.len() == n && self.upper.len() == n);

        // Phase 1: append artificials with sign chosen to make the initial
        // basis the identity (up to signs) and values nonnegative.
        let mut state: Vec<VarState> = (0..n)
            .map(|j| {
                if self.lower[j].abs() <= self.upper[j].abs() {
                    VarState::AtLower
                } else {
                    VarState::AtUpper
                }
            })
            .collect();
        let mut value: Vec<f64> = (0..n)
            .map(|j| match state[j] {
                VarState::AtLower => self.lower[j],
                VarState::AtUpper => self.upper[j],
                VarState::Basic => unreachable!(),
            })
            .collect();

        let mut resid = self.rhs.clone();
        for j in 0..n {
            if value[j] != 0.0 {
                for r in 0..m {
                    resid[r] -= self.cols[j][r] * value[j];
                }
            }
        }
        let art_sign: Vec<f64> = resid.iter().map(|&r| if r < 0.0 { -1.0 } else { 1.0 }).collect();

        let mut cols = self.cols.clone();
        let mut lower = self.lower.clone();
        let mut upper = self.upper.clone();
        let mut cost1 = vec![0.0; n];
        for r in 0..m {
            let mut col = vec![0.0; m];
            col[r] = art_sign[r];
            cols.push(col);
            lower.push(0.0);
            upper.push(f64::INFINITY);
            cost1.push(1.0);
            state.push(VarState::Basic);
            value.push(resid[r] * art_sign[r]);
        }

        let mut tab = Tableau {
            m,
            basis: (n..n + m).collect(),
            binv: identity(m),
            xb: (0..m).map(|r| resid[r] * art_sign[r]).collect(),
            state,
            value,
        };
        // the identity basis has columns art_sign[r] * e_r, so its inverse is
        // diag(art_sign)
        for r in 0..m {
            tab.binv[r][r] = art_sign[r];
        }

        let mut iters = 0;
        let st = simplex(&mut tab, &cols, &cost1, &lower, &upper, &self.rhs, max_iter, &mut iters);
        if st == LpStatus::Singular {
            return LpSolution {
                status: LpStatus::Singular,
                z: vec![0.0; n],
                objective: f64::NAN,
                state: tab.state[..n].to_vec(),
                iterations: iters,
            };
        }
        let phase1_obj: f64 = tab
            .basis
            .iter()
            .zip(tab.xb.iter())
            .map(|(&j, &v)| cost1[j] * v)
            .sum();
        if phase1_obj > 1e-7 {
            return LpSolution {
                status: LpStatus::Infeasible,
                z: vec![0.0; n],
                objective: f64::NAN,
                state: tab.state[..n].to_vec(),
                iterations: iters,
            };
        }

        // Pin artificials to zero for phase 2. Basic artificials that could
        // not be driven out stay basic at (degenerate) zero.
        for j in n..n + m {
            upper[j] = 0.0;
            if tab.state[j] != VarState::Basic {
                tab.state[j] = VarState::AtLower;
                tab.value[j] = 0.0;
            }
        }

        let mut cost2 = self.cost.clone();
        cost2.extend(std::iter::repeat(0.0).take(m));
        let st = simplex(&mut tab, &cols, &cost2, &lower, &upper, &self.rhs, max_iter, &mut iters);

        let mut z = vec![0.0; n];
        for j in 0..n {
            z[j] = match tab.state[j] {
                VarState::Basic => {
                    let row = tab.basis.iter().position(|&b| b == j).unwrap();
                    tab.xb[row]
                }
                _ => tab.value[j],
            };
        }
        let objective: f64 = (0..n).map(|j| self.cost[j] * z[j]).sum();
        LpSolution {
            status: st,
            z,
            objective,
            state: tab.state[..n].to_vec(),
            iterations: iters,
        }
    }
}

fn identity(m: usize) -> Vec<Vec<f64>> {
    let mut e = vec![vec![0.0; m]; m];
    for (r, row) in e.iter_mut().enumerate() {
        row[r] = 1.0;
    }
    e
}

#[allow(clippy::too_many_arguments)]
fn simplex(
    tab: &mut Tableau,
    cols: &[Vec<f64>],
    cost: &[f64],
    lower: &[f64],
    upper: &[f64],
    rhs: &[f64],
    max_iter: usize,
    iters: &mut usize,
) -> LpStatus {
    let m = tab.m;
    let ncols = cols.len();
    let mut degenerate_run = 0usize;
    let mut since_refactor = 0usize;

    loop {
        if *iters >= max_iter {
            return LpStatus::IterationLimit;
        }
        *iters += 1;
        since_refactor += 1;
        if since_refactor >= REFACTOR_EVERY {
            if !refactor(tab, cols, rhs) {
                return LpStatus::Singular;
            }
            since_refactor = 0;
        }

        // simplex multipliers y = c_B' Binv
        let mut y = vec![0.0; m];
        for (k, &bj) in tab.basis.iter().enumerate() {
            let cb = cost[bj];
            if cb != 0.0 {
                for r in 0..m {
                    y[r] += cb * tab.binv[k][r];
                }
            }
        }

        // pricing
        let bland = degenerate_run > BLAND_AFTER;
        let mut enter: Option<(usize, f64, bool)> = None; // (col, rc, from_lower)
        for j in 0..ncols {
            match tab.state[j] {
                VarState::Basic => continue,
                VarState::AtLower => {
                    if lower[j] == upper[j] {
                        continue;
                    }
                    let rc = cost[j] - dot(&y, &cols[j]);
                    if rc < -OPT_TOL {
                        if bland {
                            enter = Some((j, rc, true));
                            break;
                        }
                        if enter.map_or(true, |(_, b, _)| rc < b) {
                            enter = Some((j, rc, true));
                        }
                    }
                }
                VarState::AtUpper => {
                    let rc = cost[j] - dot(&y, &cols[j]);
                    if rc > OPT_TOL {
                        if bland {
                            enter = Some((j, -rc, false));
                            break;
                        }
                        if enter.map_or(true, |(_, b, _)| -rc < b) {
                            enter = Some((j, -rc, false));
                        }
                    }
                }
            }
        }
        let (jin, _, from_lower) = match enter {
            Some(e) => e,
            None => return LpStatus::Optimal,
        };

        // direction of basic variables as entering moves by +t (from lower)
        // or -t (from upper)
        let w = mat_vec(&tab.binv, &cols[jin]);
        let sigma = if from_lower { 1.0 } else { -1.0 };

        // ratio test
        let range = upper[jin] - lower[jin];
        let mut t_max = range;
        let mut leave: Option<(usize, bool)> = None; // (basis row, leaves_at_upper)
        for r in 0..m {
            let d = -sigma * w[r]; // basic value moves by d * t
            if d.abs() < 1e-12 {
                continue;
            }
            let bj = tab.basis[r];
            let (limit, at_upper) = if d > 0.0 {
                (upper[bj] - tab.xb[r], true)
            } else {
                (tab.xb[r] - lower[bj], false)
            };
            let t = (limit.max(0.0)) / d.abs();
            if t < t_max - 1e-15 || (t < t_max + 1e-15 && leave.is_none() && t < range) {
                t_max = t.max(0.0);
                leave = Some((r, at_upper));
            }
        }

        if !t_max.is_finite() {
            // all variables in this crate's problems are boxed; unbounded
            // can only mean numerical trouble
            return LpStatus::Singular;
        }

        if t_max <= FEAS_TOL {
            degenerate_run += 1;
        } else {
            degenerate_run = 0;
        }

        match leave {
            None => {
                // bound flip: entering crosses its whole range
                for r in 0..m {
                    tab.xb[r] += -sigma * w[r] * t_max;
                }
                tab.state[jin] = if from_lower {
                    VarState::AtUpper
                } else {
                    VarState::AtLower
                };
                tab.value[jin] = if from_lower { upper[jin] } else { lower[jin] };
            }
            Some((r, at_upper)) => {
                let pivot = w[r];
                if pivot.abs() < 1e-11 {
                    if !refactor(tab, cols, rhs) {
                        return LpStatus::Singular;
                    }
                    since_refactor = 0;
                    continue;
                }
                let jout = tab.basis[r];
                // new values
                let enter_val = if from_lower {
                    lower[jin] + t_max
                } else {
                    upper[jin] - t_max
                };
                for i in 0..m {
                    tab.xb[i] += -sigma * w[i] * t_max;
                }
                tab.xb[r] = enter_val;
                tab.state[jout] = if at_upper {
                    VarState::AtUpper
                } else {
                    VarState::AtLower
                };
                tab.value[jout] = if at_upper { upper[jout] } else { lower[jout] };
                tab.state[jin] = VarState::Basic;
                tab.basis[r] = jin;
                // product-form update of Binv
                let wr = w[r];
                let pivot_row: Vec<f64> = tab.binv[r].iter().map(|&v| v / wr).collect();
                for i in 0..m {
                    if i == r {
                        continue;
                    }
                    let f = w[i];
                    if f != 0.0 {
                        for k in 0..m {
                            tab.binv[i][k] -= f * pivot_row[k];
                        }
                    }
                }
                tab.binv[r] = pivot_row;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

/// Rebuild the basis inverse and basic values from scratch. Returns false if
/// the basis matrix is numerically singular.
fn refactor(tab: &mut Tableau, cols: &[Vec<f64>], rhs: &[f64]) -> bool {
    let m = tab.m;
    // Gauss-Jordan on [B | I]
    let mut a: Vec<Vec<f64>> = (0..m)
        .map(|r| {
            let mut row: Vec<f64> = tab.basis.iter().map(|&j| cols[j][r]).collect();
            row.extend((0..m).map(|k| if k == r { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for c in 0..m {
        let mut p = c;
        for r in c + 1..m {
            if a[r][c].abs() > a[p][c].abs() {
                p = r;
            }
        }
        if a[p][c].abs() < 1e-12 {
            return false;
        }
        a.swap(c, p);
        let d = a[c][c];
        for k in 0..2 * m {
            a[c][k] /= d;
        }
        for r in 0..m {
            if r != c && a[r][c] != 0.0 {
                let f = a[r][c];
                for k in 0..2 * m {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
    }
    // binv maps by column index k of B: xb = Binv * (...) with the row-k of
    // binv corresponding to basis slot k
    for k in 0..m {
        for r in 0..m {
            tab.binv[k][r] = a[k][m + r];
        }
    }
    // recompute basic values
    let mut resid = rhs.to_vec();
    for (j, st) in tab.state.iter().enumerate() {
        if *st != VarState::Basic && tab.value[j] != 0.0 {
            for r in 0..m {
                resid[r] -= cols[j][r] * tab.value[j];
            }
        }
    }
    tab.xb = mat_vec(&tab.binv, &resid);
    true
}
