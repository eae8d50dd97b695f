//! First-order and active-set solvers for the smooth or non-polyhedral
//! cases: the `l2`-constrained primal problem and minimum-norm
//! certificates for a general exponent `beta`.
//!
//! Both solvers run primal-dual (Chambolle-Pock) iterations and
//! periodically try to *polish* the iterate: the support and signs read
//! off the iterate determine a smooth equality-constrained problem that is
//! solved to machine precision, and the result is accepted when its KKT
//! residual meets the tolerance.
//!
//! For certificates the polishing step is a sign-fixed active-set method
//! on the multiplier problem
//!
//! ```text
//! min_v  (1/alpha) ||Phi v||_alpha^alpha - <s_I, v_I> + ||v_{I^c}||_1
//! ```
//!
//! whose solution gives the certificate through `p = sign(q)|q|^(alpha-1)`
//! with `q = Phi v`.

use crate::linalg::{dot, norm_inf, pseudo_inverse, sign, solve_square, Matrix, DEFAULT_RANK_TOL};
use crate::norm::NormIndex;
use crate::solver::kkt::{certificate_kkt_residual, kkt_residual, relative_support};

#[derive(Clone, Copy, Debug)]
pub struct FirstOrderOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Iterations between residual checks and polishing attempts.
    pub check_every: usize,
}

impl Default for FirstOrderOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_iterations: 200_000,
            check_every: 100,
        }
    }
}

/// Power-method estimate of the spectral norm, inflated slightly so that
/// step sizes derived from it stay admissible.
pub fn operator_norm_estimate(phi: &Matrix) -> f64 {
    let n = phi.cols();
    let mut x: Vec<f64> = (0..n).map(|j| 1.0 + (j as f64 * 0.618_033_988_7).fract()).collect();
    let mut est = 0.0;
    for _ in 0..200 {
        let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nrm == 0.0 {
            return 0.0;
        }
        x.iter_mut().for_each(|v| *v /= nrm);
        let y = phi.matvec(&x);
        x = phi.tr_matvec(&y);
        let new = x.iter().map(|v| v * v).sum::<f64>().sqrt().sqrt();
        if (new - est).abs() <= 1e-10 * new {
            est = new;
            break;
        }
        est = new;
    }
    1.01 * est
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Euclidean projection onto `{u : ||u - center||_alpha <= radius}` for
/// `alpha` in `{1, 2, inf}`.
pub fn project_ball(u: &[f64], center: &[f64], radius: f64, alpha: NormIndex) -> Vec<f64> {
    let d: Vec<f64> = u.iter().zip(center).map(|(a, b)| a - b).collect();
    let proj = match alpha {
        NormIndex::Inf => d.iter().map(|v| v.clamp(-radius, radius)).collect(),
        NormIndex::Two => {
            let nrm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            if nrm <= radius {
                d
            } else {
                d.iter().map(|v| v * radius / nrm).collect()
            }
        }
        NormIndex::One => project_l1(&d, radius),
        NormIndex::Other(_) => panic!("ball projection only implemented for alpha in {{1, 2, inf}}"),
    };
    proj.iter().zip(center).map(|(a, b)| a + b).collect()
}

fn project_l1(d: &[f64], radius: f64) -> Vec<f64> {
    if d.iter().map(|v| v.abs()).sum::<f64>() <= radius {
        return d.to_vec();
    }
    if radius == 0.0 {
        return vec![0.0; d.len()];
    }
    let mut mags: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &mk) in mags.iter().enumerate() {
        cum += mk;
        let t = (cum - radius) / (k + 1) as f64;
        if mk > t {
            theta = t;
        } else {
            break;
        }
    }
    d.iter().map(|&v| soft_threshold(v, theta)).collect()
}

/// Outcome of an iterative solve: the best pair seen and its residual.
#[derive(Clone, Debug)]
pub struct Iterate {
    pub primal: Vec<f64>,
    pub dual: Vec<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Chambolle-Pock iterations for `min ||x||_1 s.t. ||Phi x - y||_alpha <= tau`
/// with `alpha` in `{1, 2, inf}`. The returned dual is the vector `p` of the
/// optimality system. For `alpha = 2` the iterate is polished by the exact
/// sign-fixed solve of [`polish_l2_primal`].
pub fn primal_chambolle_pock(phi: &Matrix, y: &[f64], alpha: NormIndex, tau: f64, opts: &FirstOrderOptions) -> Iterate {
    let (m, n) = phi.shape();
    let l = operator_norm_estimate(phi).max(f64::MIN_POSITIVE);
    let sigma = 0.99 / l;
    let step = 0.99 / l;
    let mut x = vec![0.0; n];
    let mut xbar = vec![0.0; n];
    let mut z = vec![0.0; m];
    let mut best = Iterate {
        primal: x.clone(),
        dual: vec![0.0; m],
        kkt_residual: kkt_residual(&x, &vec![0.0; m], phi, y, alpha, tau),
        iterations: 0,
        converged: false,
    };
    if best.kkt_residual <= opts.tolerance {
        best.converged = true;
        return best;
    }
    for it in 1..=opts.max_iterations {
        let kx = phi.matvec(&xbar);
        let zeta: Vec<f64> = z.iter().zip(&kx).map(|(a, b)| a + sigma * b).collect();
        let scaled: Vec<f64> = zeta.iter().map(|v| v / sigma).collect();
        let proj = project_ball(&scaled, y, tau, alpha);
        z = zeta.iter().zip(&proj).map(|(a, b)| a - sigma * b).collect();
        let ktz = phi.tr_matvec(&z);
        let xnew: Vec<f64> = x
            .iter()
            .zip(&ktz)
            .map(|(a, b)| soft_threshold(a - step * b, step))
            .collect();
        for j in 0..n {
            xbar[j] = 2.0 * xnew[j] - x[j];
        }
        x = xnew;
        if it % opts.check_every == 0 || it == opts.max_iterations {
            let p: Vec<f64> = z.iter().map(|v| -v).collect();
            let r = kkt_residual(&x, &p, phi, y, alpha, tau);
            if r < best.kkt_residual {
                best = Iterate {
                    primal: x.clone(),
                    dual: p,
                    kkt_residual: r,
                    iterations: it,
                    converged: false,
                };
            }
            if alpha == NormIndex::Two {
                if let Some((xp, pp)) = polish_l2_primal(phi, y, tau, &x) {
                    let r = kkt_residual(&xp, &pp, phi, y, alpha, tau);
                    if r < best.kkt_residual {
                        best = Iterate {
                            primal: xp,
                            dual: pp,
                            kkt_residual: r,
                            iterations: it,
                            converged: false,
                        };
                    }
                }
            }
            best.iterations = it;
            if best.kkt_residual <= opts.tolerance {
                best.converged = true;
                return best;
            }
        }
    }
    best
}

/// Exact solution of the `l2`-constrained problem restricted to the support
/// and signs of `guess`. Returns `None` when the restricted problem is
/// degenerate or the signs are not reproduced.
pub fn polish_l2_primal(phi: &Matrix, y: &[f64], tau: f64, guess: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let (m, n) = phi.shape();
    let supp = relative_support(guess, 1e-6);
    if supp.is_empty() {
        return Some((vec![0.0; n], vec![0.0; m]));
    }
    if supp.len() > m {
        return None;
    }
    let sub = phi.select_cols(&supp);
    let pinv = pseudo_inverse(&sub, DEFAULT_RANK_TOL).ok()?;
    let xls = pinv.matvec(y);
    let fit = sub.matvec(&xls);
    let rho2: f64 = y.iter().zip(&fit).map(|(a, b)| (a - b) * (a - b)).sum();
    let slack = tau * tau - rho2;
    if slack <= 0.0 {
        return None;
    }
    let sig: Vec<f64> = supp.iter().map(|&i| sign(guess[i])).collect();
    let w = pinv.matvec(&pinv.tr_matvec(&sig));
    let kappa = dot(&sig, &w);
    if kappa <= 0.0 {
        return None;
    }
    let lambda = (kappa / slack).sqrt();
    let mut x = vec![0.0; n];
    for (k, &i) in supp.iter().enumerate() {
        let v = xls[k] - w[k] / lambda;
        if sign(v) != sig[k] {
            return None;
        }
        x[i] = v;
    }
    let r: Vec<f64> = y.iter().zip(phi.matvec(&x)).map(|(a, b)| a - b).collect();
    let p = r.iter().map(|v| lambda * v).collect();
    Some((x, p))
}

/// Maps `q` to `sign(q)|q|^(e)`.
fn signed_power(q: &[f64], e: f64) -> Vec<f64> {
    if e == 1.0 {
        return q.to_vec();
    }
    q.iter().map(|&v| sign(v) * v.abs().powf(e)).collect()
}

fn power_sum(q: &[f64], a: f64) -> f64 {
    if a == 2.0 {
        return q.iter().map(|v| v * v).sum();
    }
    q.iter().map(|v| v.abs().powf(a)).sum()
}

/// A sign pattern on indices outside the support, used to warm-start the
/// certificate active set from a nearby exponent.
pub type SignPattern = Vec<(usize, f64)>;

/// Minimum-norm certificate for a finite `beta > 1` by the sign-fixed
/// active-set method, optionally warm-started from a sign pattern.
///
/// On success `dual` holds `v` normalized so that `Phi v` is a subgradient
/// of `||.||_beta` at `p`.
pub fn certificate_active_set(
    phi: &Matrix,
    support: &[usize],
    signs: &[f64],
    beta: NormIndex,
    warm: Option<&SignPattern>,
    tolerance: f64,
) -> Option<Iterate> {
    let (m, n) = phi.shape();
    let alpha = beta.conjugate().value();
    let mut in_i = vec![false; n];
    let mut target = vec![0.0; n];
    for (&i, &s) in support.iter().zip(signs) {
        in_i[i] = true;
        target[i] = s;
    }
    // theta[j] = sign of v_j on the active set outside I
    let mut theta = vec![0.0; n];
    if let Some(w) = warm {
        for &(j, s) in w {
            if !in_i[j] {
                theta[j] = s;
            }
        }
    }
    let mut v = vec![0.0; n];
    let objective = |v: &[f64]| -> f64 {
        let q = phi.matvec(v);
        let mut f = power_sum(&q, alpha) / alpha;
        for j in 0..n {
            f += if in_i[j] { -target[j] * v[j] } else { v[j].abs() };
        }
        f
    };
    let max_outer = 4 * n + 20;
    let mut steps = 0usize;
    let mut p = vec![0.0; m];
    let mut last_added: Option<usize> = None;
    for _ in 0..max_outer {
        // sign-fixed solves until the line search keeps the full step
        loop {
            steps += 1;
            if steps > 8 * n + 50 {
                return None;
            }
            let active: Vec<usize> = (0..n).filter(|&j| in_i[j] || theta[j] != 0.0).collect();
            if active.len() > m {
                // the objective decreases linearly along the kernel of
                // Phi_A; follow it until an excess multiplier vanishes
                let j_new = last_added?;
                let old: Vec<usize> = active.iter().copied().filter(|&j| j != j_new).collect();
                let pinv = pseudo_inverse(&phi.select_cols(&old), DEFAULT_RANK_TOL).ok()?;
                let x = pinv.matvec(&phi.col(j_new));
                let mut step = f64::INFINITY;
                let mut hit = None;
                for (k, &j) in old.iter().enumerate() {
                    let d = -theta[j_new] * x[k];
                    if !in_i[j] && v[j] * d < 0.0 {
                        let s = -v[j] / d;
                        if s < step {
                            step = s;
                            hit = Some(j);
                        }
                    }
                }
                let hit = hit?;
                for (k, &j) in old.iter().enumerate() {
                    v[j] += step * (-theta[j_new] * x[k]);
                }
                v[j_new] += step * theta[j_new];
                v[hit] = 0.0;
                theta[hit] = 0.0;
                last_added = None;
                continue;
            }
            let t: Vec<f64> = active
                .iter()
                .map(|&j| if in_i[j] { target[j] } else { -theta[j] })
                .collect();
            let sub = phi.select_cols(&active);
            let c0: Vec<f64> = active.iter().map(|&j| v[j]).collect();
            let start = (norm_inf(&p) > 0.0).then(|| p.clone());
            let (c, p_sub) = solve_sign_fixed(&sub, &t, alpha, &c0, start)?;
            // crossings of zero along the segment from the current point
            let mut cands: Vec<f64> = vec![1.0];
            for (k, &j) in active.iter().enumerate() {
                if in_i[j] {
                    continue;
                }
                if v[j] * c[k] < 0.0 {
                    cands.push(v[j] / (v[j] - c[k]));
                }
            }
            if cands.len() == 1 {
                let mut sign_ok = true;
                for (k, &j) in active.iter().enumerate() {
                    v[j] = c[k];
                    if !in_i[j] {
                        if c[k] == 0.0 || sign(c[k]) != theta[j] {
                            sign_ok = false;
                        }
                    }
                }
                if sign_ok {
                    p = p_sub;
                    break;
                }
                for &j in &active {
                    if !in_i[j] && (v[j] == 0.0 || sign(v[j]) != theta[j]) {
                        theta[j] = sign(v[j]);
                    }
                }
                continue;
            }
            cands.sort_by(|a, b| a.total_cmp(b));
            let mut best_t = 1.0;
            let mut best_f = f64::INFINITY;
            let base = v.clone();
            for &s in &cands {
                let mut trial = base.clone();
                for (k, &j) in active.iter().enumerate() {
                    trial[j] = base[j] + s * (c[k] - base[j]);
                }
                let f = objective(&trial);
                if f < best_f {
                    best_f = f;
                    best_t = s;
                }
            }
            for (k, &j) in active.iter().enumerate() {
                let nv = base[j] + best_t * (c[k] - base[j]);
                v[j] = nv;
                if !in_i[j] {
                    if base[j] != 0.0 && (nv == 0.0 || nv.abs() <= 1e-14 * base[j].abs() || sign(nv) != sign(base[j])) {
                        v[j] = 0.0;
                        theta[j] = 0.0;
                    } else if nv != 0.0 {
                        theta[j] = sign(nv);
                    }
                }
            }
        }
        let g = phi.tr_matvec(&p);
        let mut worst: Option<(usize, f64)> = None;
        for j in 0..n {
            if in_i[j] || theta[j] != 0.0 {
                continue;
            }
            let viol = g[j].abs() - 1.0;
            if viol > 0.1 * tolerance && worst.map_or(true, |w| viol > w.1) {
                worst = Some((j, viol));
            }
        }
        match worst {
            Some((j, _)) => {
                theta[j] = -sign(g[j]);
                last_added = Some(j);
            }
            None => {
                let nrm = beta.norm(&p);
                if nrm == 0.0 {
                    return None;
                }
                let scale = nrm.powf(beta.value() - 1.0);
                let vn: Vec<f64> = v.iter().map(|x| x / scale).collect();
                let kkt = certificate_kkt_residual(&p, &vn, phi, support, signs, beta);
                return Some(Iterate {
                    primal: p,
                    dual: vn,
                    kkt_residual: kkt,
                    iterations: steps,
                    converged: kkt <= tolerance,
                });
            }
        }
    }
    None
}

/// Relative stationarity accepted when Newton stalls at rounding level; the
/// caller's residual check decides whether the result is usable.
const STALL_ACCEPT: f64 = 1e-6;

/// Solves the sign-fixed subproblem and returns the multiplier `c` on the
/// active columns together with the certificate `p`. The formulation with
/// the bounded Hessian is used: the multiplier form for `alpha >= 2`, the
/// certificate form otherwise.
fn solve_sign_fixed(a: &Matrix, t: &[f64], alpha: f64, c0: &[f64], start: Option<Vec<f64>>) -> Option<(Vec<f64>, Vec<f64>)> {
    if alpha >= 2.0 {
        let c = newton_sign_fixed(a, t, alpha, c0)?;
        let p = signed_power(&a.matvec(&c), alpha - 1.0);
        Some((c, p))
    } else {
        newton_certificate_form(a, t, alpha / (alpha - 1.0), start)
    }
}

/// Damped Newton method for `min_p (1/beta)||p||_beta^beta s.t. A^T p = t`
/// with `beta > 2`, using Levenberg-Marquardt damping on the feasible affine
/// set. Returns the multiplier `c` with `A c = grad` at the solution, and `p`.
fn newton_certificate_form(a: &Matrix, t: &[f64], beta: f64, start: Option<Vec<f64>>) -> Option<(Vec<f64>, Vec<f64>)> {
    let m = a.rows();
    let gram_lu = crate::linalg::Lu::factor(&a.transpose().matmul(a)).ok()?;
    // orthogonal projector onto ker A^T
    let mut proj = Matrix::identity(m);
    for col in 0..m {
        let w = a.matvec(&gram_lu.solve(a.row(col)));
        for r in 0..m {
            proj.set(r, col, proj.get(r, col) - w[r]);
        }
    }
    let project = |p: &mut Vec<f64>| {
        let r: Vec<f64> = t.iter().zip(a.tr_matvec(p)).map(|(u, w)| u - w).collect();
        let corr = a.matvec(&gram_lu.solve(&r));
        for (pi, ci) in p.iter_mut().zip(corr) {
            *pi += ci;
        }
    };
    let mut p = start.unwrap_or_else(|| vec![0.0; m]);
    project(&mut p);
    project(&mut p);
    let f = |p: &[f64]| power_sum(p, beta) / beta;
    let mut fp = f(&p);
    let multiplier = |g: &[f64]| gram_lu.solve(&a.tr_matvec(g));
    let mut lambda = -1.0;
    for _ in 0..500 {
        let g = signed_power(&p, beta - 1.0);
        let pg = proj.matvec(&g);
        let gscale = norm_inf(&g).max(f64::MIN_POSITIVE);
        let stat = norm_inf(&pg) / gscale;
        if stat <= 1e-12 {
            return Some((multiplier(&g), p));
        }
        let d: Vec<f64> = p.iter().map(|v| (beta - 1.0) * v.abs().powf(beta - 2.0)).collect();
        let dmax = d.iter().copied().fold(0.0, f64::max);
        if lambda < 0.0 {
            lambda = 1e-3 * dmax;
        }
        // P D P
        let mut pd = proj.clone();
        for r in 0..m {
            for (c, dc) in d.iter().enumerate() {
                pd.set(r, c, pd.get(r, c) * dc);
            }
        }
        let h = pd.matmul(&proj);
        let rhs: Vec<f64> = pg.iter().map(|v| -v).collect();
        let mut accepted = false;
        while lambda <= 1e20 * dmax.max(f64::MIN_POSITIVE) {
            let mut hl = h.clone();
            for r in 0..m {
                hl.set(r, r, hl.get(r, r) + lambda);
            }
            let Ok(step) = solve_square(&hl, &rhs) else {
                lambda = (lambda * 8.0).max(1e-12 * dmax);
                continue;
            };
            let step = proj.matvec(&step);
            let slope = dot(&pg, &step);
            let quad = dot(&step, &h.matvec(&step));
            // the Newton decrement bounds the remaining decrease of f
            if -slope <= 1e-15 * fp && stat <= STALL_ACCEPT {
                return Some((multiplier(&g), p));
            }
            let trial: Vec<f64> = p.iter().zip(&step).map(|(u, w)| u + w).collect();
            let ft = f(&trial);
            let predicted = -(slope + 0.5 * quad);
            if ft < fp {
                let ratio = (fp - ft) / predicted.max(f64::MIN_POSITIVE);
                p = trial;
                project(&mut p);
                fp = f(&p);
                if ratio > 0.25 {
                    lambda /= 4.0;
                }
                accepted = true;
                break;
            }
            lambda = (lambda * 8.0).max(1e-12 * dmax);
        }
        if !accepted {
            return (stat <= STALL_ACCEPT).then(|| (multiplier(&g), p));
        }
    }
    None
}

/// Damped Newton method for `min_c (1/alpha)||A c||_alpha^alpha - <t, c>`.
fn newton_sign_fixed(a: &Matrix, t: &[f64], alpha: f64, c0: &[f64]) -> Option<Vec<f64>> {
    let k = a.cols();
    let h = |c: &[f64]| -> f64 { power_sum(&a.matvec(c), alpha) / alpha - dot(t, c) };
    let mut c = c0.to_vec();
    if norm_inf(&c) == 0.0 || alpha == 2.0 {
        // least-squares start, rescaled along its ray
        let g = a.transpose().matmul(a);
        let c2 = solve_square(&g, t).ok()?;
        let num = dot(t, &c2);
        let den = power_sum(&a.matvec(&c2), alpha);
        if num <= 0.0 || den <= 0.0 {
            return None;
        }
        let s = (num / den).powf(1.0 / (alpha - 1.0));
        c = c2.iter().map(|v| v * s).collect();
        if alpha == 2.0 {
            return Some(c);
        }
    }
    let tscale = 1.0 + norm_inf(t);
    let mut fc = h(&c);
    for _ in 0..200 {
        let q = a.matvec(&c);
        let p = signed_power(&q, alpha - 1.0);
        let grad: Vec<f64> = a.tr_matvec(&p).iter().zip(t).map(|(u, w)| u - w).collect();
        if norm_inf(&grad) <= 1e-13 * tscale {
            return Some(c);
        }
        let qmax = norm_inf(&q);
        let floor = 1e-9 * qmax;
        let d: Vec<f64> = q
            .iter()
            .map(|v| (alpha - 1.0) * v.abs().max(floor).powf(alpha - 2.0))
            .collect();
        let mut hess = Matrix::zeros(k, k);
        for r in 0..a.rows() {
            let row = a.row(r);
            let dr = d[r];
            for i in 0..k {
                let ri = dr * row[i];
                if ri == 0.0 {
                    continue;
                }
                for j in i..k {
                    let val = hess.get(i, j) + ri * row[j];
                    hess.set(i, j, val);
                }
            }
        }
        let mut diag_max = 0.0f64;
        for i in 0..k {
            for j in 0..i {
                let val = hess.get(j, i);
                hess.set(i, j, val);
            }
            diag_max = diag_max.max(hess.get(i, i));
        }
        let neg: Vec<f64> = grad.iter().map(|v| -v).collect();
        let mut reg = 0.0;
        let dir = loop {
            let mut hr = hess.clone();
            for i in 0..k {
                hr.set(i, i, hr.get(i, i) + reg);
            }
            match solve_square(&hr, &neg) {
                Ok(dvec) if dvec.iter().all(|v| v.is_finite()) => break dvec,
                _ => {
                    reg = if reg == 0.0 { 1e-12 * diag_max.max(1e-300) } else { reg * 100.0 };
                    if reg > diag_max * 1e6 {
                        return None;
                    }
                }
            }
        };
        let slope = dot(&grad, &dir);
        if slope >= 0.0 {
            return if norm_inf(&grad) <= STALL_ACCEPT * tscale { Some(c) } else { None };
        }
        // Newton decrement at rounding level
        if -slope <= 1e-15 * fc.abs().max(1.0) && norm_inf(&grad) <= STALL_ACCEPT * tscale {
            return Some(c);
        }
        let mut s = 1.0;
        let mut accepted = false;
        while s > 1e-20 {
            let trial: Vec<f64> = c.iter().zip(&dir).map(|(u, w)| u + s * w).collect();
            let ft = h(&trial);
            if ft <= fc + 1e-4 * s * slope || (s == 1.0 && ft <= fc + 1e-12 * fc.abs()) {
                c = trial;
                fc = ft;
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if !accepted {
            return if norm_inf(&grad) <= STALL_ACCEPT * tscale { Some(c) } else { None };
        }
    }
    None
}

/// Proximal map of `x -> (t/beta)|x|^beta` at `z`.
fn prox_power(z: f64, t: f64, beta: f64) -> f64 {
    if z == 0.0 {
        return 0.0;
    }
    if beta == 2.0 {
        return z / (1.0 + t);
    }
    let a = z.abs();
    // root of phi(x) = x + t x^(beta-1) - a on [0, a]
    let (mut lo, mut hi) = (0.0f64, a);
    let mut x = a / (1.0 + t);
    for _ in 0..100 {
        let f = x + t * x.powf(beta - 1.0) - a;
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let df = 1.0 + t * (beta - 1.0) * x.powf(beta - 2.0);
        let mut nx = x - f / df;
        if !(nx > lo && nx < hi) || !nx.is_finite() {
            nx = 0.5 * (lo + hi);
        }
        if (nx - x).abs() <= 1e-16 * a {
            x = nx;
            break;
        }
        x = nx;
    }
    sign(z) * x
}

/// Minimum-norm certificate for a finite `beta > 1`: Chambolle-Pock on
/// `min (1/beta)||p||_beta^beta + indicator_C(Phi^T p)` with
/// `C = {u : u_I = s_I, |u| <= 1}`, polished by [`certificate_active_set`]
/// from the saturation pattern of the iterate.
pub fn certificate_chambolle_pock(
    phi: &Matrix,
    support: &[usize],
    signs: &[f64],
    beta: NormIndex,
    opts: &FirstOrderOptions,
) -> Iterate {
    let (m, n) = phi.shape();
    let b = beta.value();
    let l = operator_norm_estimate(phi).max(f64::MIN_POSITIVE);
    let sigma = 0.99 / l;
    let step = 0.99 / l;
    let mut fixed = vec![None; n];
    for (&i, &s) in support.iter().zip(signs) {
        fixed[i] = Some(s);
    }
    let mut p = vec![0.0; m];
    let mut pbar = vec![0.0; m];
    let mut u = vec![0.0; n];
    let mut best = Iterate {
        primal: p.clone(),
        dual: vec![0.0; n],
        kkt_residual: f64::INFINITY,
        iterations: 0,
        converged: false,
    };
    for it in 1..=opts.max_iterations {
        let kp = phi.tr_matvec(&pbar);
        for j in 0..n {
            let zeta = u[j] + sigma * kp[j];
            let proj = match fixed[j] {
                Some(s) => s,
                None => (zeta / sigma).clamp(-1.0, 1.0),
            };
            u[j] = zeta - sigma * proj;
        }
        let ku = phi.matvec(&u);
        for i in 0..m {
            let np = prox_power(p[i] - step * ku[i], step, b);
            pbar[i] = 2.0 * np - p[i];
            p[i] = np;
        }
        if it % opts.check_every == 0 || it == opts.max_iterations {
            let nrm = beta.norm(&p);
            if nrm > 0.0 {
                let scale = nrm.powf(b - 1.0);
                let v: Vec<f64> = u.iter().map(|x| -x / scale).collect();
                let r = certificate_kkt_residual(&p, &v, phi, support, signs, beta);
                if r < best.kkt_residual {
                    best = Iterate {
                        primal: p.clone(),
                        dual: v,
                        kkt_residual: r,
                        iterations: it,
                        converged: false,
                    };
                }
                let corr = phi.tr_matvec(&p);
                let pattern: SignPattern = (0..n)
                    .filter(|&j| fixed[j].is_none() && corr[j].abs() >= 1.0 - 1e-3)
                    .map(|j| (j, -sign(corr[j])))
                    .collect();
                if let Some(pol) = certificate_active_set(phi, support, signs, beta, Some(&pattern), opts.tolerance) {
                    if pol.kkt_residual < best.kkt_residual {
                        best = Iterate { iterations: it, ..pol };
                    }
                }
            }
            best.iterations = it;
            if best.kkt_residual <= opts.tolerance {
                best.converged = true;
                return best;
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projections() {
        let c = [0.0, 0.0];
        assert_eq!(project_ball(&[3.0, -0.5], &c, 1.0, NormIndex::Inf), vec![1.0, -0.5]);
        let p2 = project_ball(&[3.0, 4.0], &c, 1.0, NormIndex::Two);
        assert!((p2[0] - 0.6).abs() < 1e-15 && (p2[1] - 0.8).abs() < 1e-15);
        let p1 = project_ball(&[3.0, 0.5], &c, 1.0, NormIndex::One);
        assert!((p1[0] - 1.0).abs() < 1e-15 && p1[1] == 0.0);
        let p1b = project_ball(&[1.0, 1.0], &c, 1.0, NormIndex::One);
        assert!((p1b[0] - 0.5).abs() < 1e-15 && (p1b[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn prox_power_solves_its_equation() {
        for &beta in &[1.2, 1.5, 2.0, 3.0, 7.0] {
            for &z in &[-2.0, 0.3, 5.0] {
                let x = prox_power(z, 0.7, beta);
                let res = x + 0.7 * sign(x) * x.abs().powf(beta - 1.0) - z;
                assert!(res.abs() < 1e-12, "beta={beta} z={z} res={res}");
            }
        }
    }

    #[test]
    fn norm_estimate_of_diagonal() {
        let a = Matrix::from_rows(&[vec![3.0, 0.0], vec![0.0, -1.0]]);
        let e = operator_norm_estimate(&a);
        assert!(e >= 3.0 && e < 3.1);
    }

    #[test]
    fn l2_primal_scalar_and_identity() {
        let phi = Matrix::identity(1);
        let it = primal_chambolle_pock(&phi, &[5.0], NormIndex::Two, 1.0, &FirstOrderOptions::default());
        assert!(it.converged);
        assert!((it.primal[0] - 4.0).abs() < 1e-9);
        // identity design, y = (3, 0.5, 0), tau = 1: residual (sqrt(0.75), 0.5, 0)
        let phi = Matrix::identity(3);
        let y = [3.0, 0.5, 0.0];
        let it = primal_chambolle_pock(&phi, &y, NormIndex::Two, 1.0, &FirstOrderOptions::default());
        assert!(it.converged, "kkt {}", it.kkt_residual);
        assert!((it.primal[0] - (3.0 - 0.75f64.sqrt())).abs() < 1e-9);
        assert_eq!(it.primal[1], 0.0);
    }

    #[test]
    fn active_set_identity_certificate() {
        let phi = Matrix::identity(4);
        for beta in [NormIndex::Two, NormIndex::Other(1.5), NormIndex::Other(4.0)] {
            let it = certificate_active_set(&phi, &[0, 2], &[1.0, -1.0], beta, None, 1e-10).expect("solve");
            assert!(it.converged);
            assert!((it.primal[0] - 1.0).abs() < 1e-12);
            assert!((it.primal[2] + 1.0).abs() < 1e-12);
            assert_eq!(it.primal[1], 0.0);
        }
    }
}
