//! Hermite, local (Taylor), and plane-wave expansions of Gaussian fields.
//!
//! All expansions represent a field sum_j q_j exp(-|x - y_j|^2 / delta)
//! (plus patch integrals) in the scaled variable t = (x - center)/sqrt(delta).
//! Hermite coefficients follow the convention
//!
//!   field(x) = sum_alpha A_alpha h_alpha(t),   h_n(t) = (-1)^n d^n/dt^n e^{-t^2},
//!
//! with A stored as a p x p row-major block over (a1, a2). Local expansions
//! store Taylor coefficients B with field(x) = sum_b B_b v^b, v = t. A 2D
//! multi-index factorizes per axis throughout, so every translation is a pair
//! of 1D matrices applied as M1 * A * M2^T.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::cheb;
use crate::treegrid::{ChebPatch, QuadTree};
use crate::Point;

/// Constant K in the Hermite magnitude bound |h_n(t)| <= K 2^(n/2) sqrt(n!).
pub const K_HERMITE: f64 = 1.09;

/// Hard cap on expansion order.
pub const P_MAX: usize = 48;

/// Expansion flavor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExpansionKind {
    /// Far-field Hermite expansion about a source center.
    Hermite,
    /// Local Taylor expansion about a target center.
    Local,
    /// Discretized plane-wave (Fourier) representation.
    Planewave,
}

/// Coefficient storage; real for Hermite/local, complex for plane waves.
#[derive(Clone, Debug)]
pub enum ExpansionCoeffs {
    /// Row-major p x p real block.
    Real(Vec<f64>),
    /// Row-major p x p complex block (p = nodes per dimension).
    Complex(Vec<Complex64>),
}

/// A truncated expansion of a Gaussian field.
#[derive(Clone, Debug)]
pub struct Expansion {
    /// Which representation the coefficients use.
    pub kind: ExpansionKind,
    /// Expansion center.
    pub center: Point,
    /// Length scale sqrt(delta).
    pub scale: f64,
    /// Order (coefficients per dimension).
    pub p: usize,
    /// Coefficient block.
    pub coeffs: ExpansionCoeffs,
}

impl Expansion {
    fn real(&self) -> &[f64] {
        match &self.coeffs {
            ExpansionCoeffs::Real(v) => v,
            ExpansionCoeffs::Complex(_) => unreachable!("real coefficients expected"),
        }
    }
}

/// n! as a float.
pub(crate) fn fact(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

/// Hermite values h_0(x) .. h_n(x) by the recurrence
/// h_{m+1} = 2x h_m - 2m h_{m-1}, h_0 = e^{-x^2}.
pub(crate) fn hermite_values(n: usize, x: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(n + 1);
    let e = (-x * x).exp();
    h.push(e);
    if n >= 1 {
        h.push(2.0 * x * e);
    }
    for m in 1..n {
        let next = 2.0 * x * h[m] - 2.0 * m as f64 * h[m - 1];
        h.push(next);
    }
    h
}

/// Truncation bound K^2 Q_B (2 S_r(p) + T_r(p)) T_r(p) with
/// S_r(p) = sum_{n<p} r^n/sqrt(n!) and T_r(p) the tail from n = p.
///
/// Here r = side / (sqrt(2) sqrt(delta)) for sources spread over a box of the
/// given side length; the sqrt(2) normalization is fixed by the moment bound
/// |A_n| <= Q rho^n / n! with rho = half-side / sqrt(delta).
pub fn hermite_error_bound(p: usize, r: f64, q_b: f64) -> f64 {
    let mut s = 0.0;
    let mut t = 0.0;
    let mut term = 1.0; // r^n / sqrt(n!)
    for n in 0..(p + 1000) {
        if n < p {
            s += term;
        } else {
            t += term;
        }
        term *= r / ((n + 1) as f64).sqrt();
        if n >= p && term < 1e-300 {
            break;
        }
    }
    K_HERMITE * K_HERMITE * q_b * (2.0 * s + t) * t
}

/// Smallest p with hermite_error_bound(p, r, 1) * slack <= eps, if any
/// p <= P_MAX achieves it.
pub(crate) fn choose_order(eps: f64, r: f64, slack: f64) -> Option<usize> {
    (1..=P_MAX).find(|&p| hermite_error_bound(p, r, 1.0) * slack <= eps)
}

/// out = m1 * a * m2^T with m1, m2 of shape p_out x p_in and a p_in x p_in.
pub(crate) fn sandwich(m1: &[f64], a: &[f64], m2: &[f64], p_out: usize, p_in: usize) -> Vec<f64> {
    // tmp = m1 * a (p_out x p_in)
    let mut tmp = vec![0.0; p_out * p_in];
    for i in 0..p_out {
        for l in 0..p_in {
            let m = m1[i * p_in + l];
            if m == 0.0 {
                continue;
            }
            for j in 0..p_in {
                tmp[i * p_in + j] += m * a[l * p_in + j];
            }
        }
    }
    let mut out = vec![0.0; p_out * p_out];
    for i in 0..p_out {
        for j in 0..p_out {
            let mut v = 0.0;
            for l in 0..p_in {
                v += tmp[i * p_in + l] * m2[j * p_in + l];
            }
            out[i * p_out + j] = v;
        }
    }
    out
}

/// Hermite moments of a Chebyshev patch about `center`:
/// A_alpha = (1/alpha!) int f(y) ((y - center)/scale)^alpha dy.
pub(crate) fn patch_moments(
    tree: &QuadTree,
    patch: &ChebPatch,
    center: Point,
    delta: f64,
    p: usize,
) -> Vec<f64> {
    let k = tree.k;
    let s = delta.sqrt();
    let cb = tree.box_center(patch.box_id);
    let hb = tree.box_halfwidth(patch.box_id);
    let mti = cheb::monomial_t_integrals(p - 1, k);
    let w = hb / s;
    // Per-axis matrix P[a][j] = hb * sum_m C(a,m) g^{a-m} w^m mti[m][j].
    let axis = |g: f64| -> Vec<f64> {
        let mut m = vec![0.0; p * k];
        for a in 0..p {
            // binomial coefficients C(a, mm) g^{a-mm} w^mm built incrementally
            let mut cmono = vec![0.0; a + 1];
            let mut gpow = 1.0;
            for mm in (0..=a).rev() {
                cmono[mm] = crate::numerics::binomial(a, mm) * gpow;
                gpow *= g;
            }
            let mut wpow = 1.0;
            for (mm, c) in cmono.iter_mut().enumerate() {
                *c *= wpow;
                wpow *= w;
                for j in 0..k {
                    m[a * k + j] += hb * *c * mti[mm][j];
                }
            }
        }
        m
    };
    let p1 = axis((cb[0] - center[0]) / s);
    let p2 = axis((cb[1] - center[1]) / s);
    let mut a = sandwich_rect(&p1, &patch.coeffs, &p2, p, k);
    for a1 in 0..p {
        for a2 in 0..p {
            a[a1 * p + a2] /= fact(a1) * fact(a2);
        }
    }
    a
}

/// out = m1 * c * m2^T with m1, m2 of shape p x k and c k x k.
pub(crate) fn sandwich_rect(m1: &[f64], c: &[f64], m2: &[f64], p: usize, k: usize) -> Vec<f64> {
    let mut tmp = vec![0.0; p * k];
    for i in 0..p {
        for l in 0..k {
            let m = m1[i * k + l];
            if m == 0.0 {
                continue;
            }
            for j in 0..k {
                tmp[i * k + j] += m * c[l * k + j];
            }
        }
    }
    let mut out = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..p {
            let mut v = 0.0;
            for l in 0..k {
                v += tmp[i * k + l] * m2[j * k + l];
            }
            out[i * p + j] = v;
        }
    }
    out
}

/// Add the moment contribution of point charges to a Hermite block.
pub(crate) fn add_charge_moments(
    a: &mut [f64],
    charges: &[(Point, f64)],
    center: Point,
    delta: f64,
    p: usize,
) {
    let s = delta.sqrt();
    for &(y, q) in charges {
        let u1 = (y[0] - center[0]) / s;
        let u2 = (y[1] - center[1]) / s;
        let mut pow1 = vec![0.0; p];
        let mut pow2 = vec![0.0; p];
        let (mut v1, mut v2) = (1.0, 1.0);
        for n in 0..p {
            pow1[n] = v1 / fact(n);
            pow2[n] = v2 / fact(n);
            v1 *= u1;
            v2 *= u2;
        }
        for a1 in 0..p {
            for a2 in 0..p {
                a[a1 * p + a2] += q * pow1[a1] * pow2[a2];
            }
        }
    }
}

/// Form a truncated Hermite expansion of a leaf's sources about `center`.
pub fn form_hermite(
    tree: &QuadTree,
    box_id: u32,
    patch: Option<&ChebPatch>,
    charges: &[(Point, f64)],
    center: Point,
    delta: f64,
    p: usize,
) -> Result<Expansion> {
    if !(delta > 0.0) || p < 1 || p > P_MAX {
        return Err(Error::InvalidArgument("form_hermite: bad delta or order".into()));
    }
    let c = tree.box_center(box_id);
    let h = tree.box_halfwidth(box_id);
    let tol = 1e-12 * h;
    for &(y, _) in charges {
        if (y[0] - c[0]).abs() > h + tol || (y[1] - c[1]).abs() > h + tol {
            return Err(Error::InvalidArgument("form_hermite: charge outside box".into()));
        }
    }
    if let Some(pa) = patch {
        if pa.box_id != box_id {
            return Err(Error::InvalidArgument("form_hermite: patch on a different box".into()));
        }
    }
    let mut a = match patch {
        Some(pa) => patch_moments(tree, pa, center, delta, p),
        None => vec![0.0; p * p],
    };
    add_charge_moments(&mut a, charges, center, delta, p);
    Ok(Expansion {
        kind: ExpansionKind::Hermite,
        center,
        scale: delta.sqrt(),
        p,
        coeffs: ExpansionCoeffs::Real(a),
    })
}

// Per-axis translation matrices (p_out x p_in, row-major).

/// Hermite-to-Hermite shift: A'_a = sum_{m<=a} z^{a-m}/(a-m)! A_m,
/// z = (old_center - new_center)/scale.
pub(crate) fn hh_matrix(z: f64, p_out: usize, p_in: usize) -> Vec<f64> {
    let mut m = vec![0.0; p_out * p_in];
    for a in 0..p_out {
        for b in 0..=a.min(p_in - 1) {
            m[a * p_in + b] = z.powi((a - b) as i32) / fact(a - b);
        }
    }
    m
}

/// Hermite-to-local: B_b = ((-1)^b / b!) sum_a A_a h_{a+b}(z),
/// z = (new_center - old_center)/scale.
pub(crate) fn hl_matrix(z: f64, p_out: usize, p_in: usize) -> Vec<f64> {
    let h = hermite_values(p_out + p_in - 2, z);
    let mut m = vec![0.0; p_out * p_in];
    for b in 0..p_out {
        let sign = if b % 2 == 0 { 1.0 } else { -1.0 };
        let fb = fact(b);
        for a in 0..p_in {
            m[b * p_in + a] = sign * h[a + b] / fb;
        }
    }
    m
}

/// Local-to-local: B'_b = sum_{a>=b} C(a,b) z^{a-b} B_a,
/// z = (new_center - old_center)/scale, from t_old = t_new + z.
pub(crate) fn ll_matrix(z: f64, p_out: usize, p_in: usize) -> Vec<f64> {
    let mut m = vec![0.0; p_out * p_in];
    for b in 0..p_out {
        for a in b..p_in {
            m[b * p_in + a] = crate::numerics::binomial(a, b) * z.powi((a - b) as i32);
        }
    }
    m
}

/// Translate an expansion to a new center, optionally converting kind.
///
/// Supported kind pairs: Hermite->Hermite (merge/shift), Hermite->Local,
/// Local->Local, and Planewave->Planewave (diagonal phase shift). The output
/// keeps the input order.
pub fn translate(e: &Expansion, target_center: Point, target_kind: ExpansionKind) -> Result<Expansion> {
    translate_p(e, target_center, target_kind, e.p)
}

/// As [`translate`] with an explicit output order.
pub(crate) fn translate_p(
    e: &Expansion,
    target_center: Point,
    target_kind: ExpansionKind,
    p_out: usize,
) -> Result<Expansion> {
    let s = e.scale;
    let kinds = (e.kind, target_kind);
    if kinds == (ExpansionKind::Planewave, ExpansionKind::Planewave) {
        return Ok(planewave_shift(e, target_center));
    }
    let (m1, m2) = match kinds {
        (ExpansionKind::Hermite, ExpansionKind::Hermite) => {
            let z1 = (e.center[0] - target_center[0]) / s;
            let z2 = (e.center[1] - target_center[1]) / s;
            (hh_matrix(z1, p_out, e.p), hh_matrix(z2, p_out, e.p))
        }
        (ExpansionKind::Hermite, ExpansionKind::Local) => {
            let z1 = (target_center[0] - e.center[0]) / s;
            let z2 = (target_center[1] - e.center[1]) / s;
            (hl_matrix(z1, p_out, e.p), hl_matrix(z2, p_out, e.p))
        }
        (ExpansionKind::Local, ExpansionKind::Local) => {
            let z1 = (target_center[0] - e.center[0]) / s;
            let z2 = (target_center[1] - e.center[1]) / s;
            (ll_matrix(z1, p_out, e.p), ll_matrix(z2, p_out, e.p))
        }
        _ => {
            return Err(Error::InvalidArgument(
                "translate: unsupported expansion kind pair".into(),
            ))
        }
    };
    let out = sandwich(&m1, e.real(), &m2, p_out, e.p);
    Ok(Expansion {
        kind: target_kind,
        center: target_center,
        scale: s,
        p: p_out,
        coeffs: ExpansionCoeffs::Real(out),
    })
}

/// Evaluate an expansion at a physical point.
pub fn eval_expansion(e: &Expansion, x: Point) -> f64 {
    let t1 = (x[0] - e.center[0]) / e.scale;
    let t2 = (x[1] - e.center[1]) / e.scale;
    match (&e.coeffs, e.kind) {
        (ExpansionCoeffs::Real(a), ExpansionKind::Hermite) => {
            let h1 = hermite_values(e.p - 1, t1);
            let h2 = hermite_values(e.p - 1, t2);
            dot2(a, &h1, &h2, e.p)
        }
        (ExpansionCoeffs::Real(a), ExpansionKind::Local) => {
            let pw = |t: f64| {
                let mut v = Vec::with_capacity(e.p);
                let mut acc = 1.0;
                for _ in 0..e.p {
                    v.push(acc);
                    acc *= t;
                }
                v
            };
            let v1 = pw(t1);
            let v2 = pw(t2);
            dot2(a, &v1, &v2, e.p)
        }
        (ExpansionCoeffs::Complex(w), _) => {
            let n = e.p;
            let kmax = pw_kmax(n);
            let mut total = Complex64::new(0.0, 0.0);
            for (idx, wc) in w.iter().enumerate() {
                let (i1, i2) = (idx / n, idx % n);
                let k1 = pw_node(kmax, n, i1);
                let k2 = pw_node(kmax, n, i2);
                let phase = Complex64::from_polar(1.0, k1 * t1 + k2 * t2);
                total += wc * phase;
            }
            total.re
        }
        _ => unreachable!("coefficient storage inconsistent with kind"),
    }
}

fn dot2(a: &[f64], v1: &[f64], v2: &[f64], p: usize) -> f64 {
    let mut total = 0.0;
    for a1 in 0..p {
        let mut row = 0.0;
        for a2 in 0..p {
            row += a[a1 * p + a2] * v2[a2];
        }
        total += v1[a1] * row;
    }
    total
}

/// Frequency cutoff for a plane-wave block with n nodes per dimension,
/// derivable from the stored block alone. Solving K^2/4 = 27 + (n/4) log K
/// balances the truncation tail of the weighted integrand (the Hermite
/// coefficient decay tames the polynomial growth of w, so the effective
/// degree is well below n) against midpoint-rule aliasing, whose images sit
/// a distance 2 pi / h = pi n / K away and recede as n grows. The self-test
/// in [`to_planewave`] rejects node counts where either error survives.
fn pw_kmax(n: usize) -> f64 {
    let mut k: f64 = 10.0;
    for _ in 0..30 {
        k = (4.0 * (27.0 + 0.25 * n as f64 * k.ln().max(0.0))).sqrt();
    }
    k
}

fn pw_node(kmax: f64, n: usize, i: usize) -> f64 {
    -kmax + (i as f64 + 0.5) * 2.0 * kmax / n as f64
}

/// Convert a Hermite expansion to a discretized plane-wave expansion with
/// `nodes` frequencies per dimension.
///
/// The identity e^{-t^2} = (1/4pi) int e^{-|k|^2/4 + i k.t} dk turns the
/// Hermite series into (1/4pi) int e^{-|k|^2/4} w(k) e^{i k.t} dk with
/// w(k) = sum_alpha A_alpha (-i k)^alpha; the integral is discretized on a
/// uniform tensor grid. A self-test against the Hermite evaluation at sample
/// targets rejects node counts too small for the requested accuracy.
pub fn to_planewave(e: &Expansion, nodes: usize, eps: f64) -> Result<Expansion> {
    if e.kind != ExpansionKind::Hermite {
        return Err(Error::InvalidArgument("to_planewave: hermite input required".into()));
    }
    let a = e.real();
    let p = e.p;
    if nodes < p {
        return Err(Error::InvalidArgument("to_planewave: need at least p nodes".into()));
    }
    let kmax = pw_kmax(nodes);
    let h = 2.0 * kmax / nodes as f64;
    let mut w = vec![Complex64::new(0.0, 0.0); nodes * nodes];
    // Per-axis tables P[i][a] = (-i k_i)^a.
    let axis: Vec<Vec<Complex64>> = (0..nodes)
        .map(|i| {
            let k = pw_node(kmax, nodes, i);
            let base = Complex64::new(0.0, -k);
            let mut v = Vec::with_capacity(p);
            let mut acc = Complex64::new(1.0, 0.0);
            for _ in 0..p {
                v.push(acc);
                acc *= base;
            }
            v
        })
        .collect();
    let quarter = 1.0 / (4.0 * std::f64::consts::PI);
    for i1 in 0..nodes {
        let k1 = pw_node(kmax, nodes, i1);
        for i2 in 0..nodes {
            let k2 = pw_node(kmax, nodes, i2);
            let mut wk = Complex64::new(0.0, 0.0);
            for a1 in 0..p {
                let mut row = Complex64::new(0.0, 0.0);
                for a2 in 0..p {
                    row += axis[i2][a2] * a[a1 * p + a2];
                }
                wk += axis[i1][a1] * row;
            }
            let gauss = (-(k1 * k1 + k2 * k2) / 4.0).exp();
            w[i1 * nodes + i2] = wk * (h * h * quarter * gauss);
        }
    }
    let out = Expansion {
        kind: ExpansionKind::Planewave,
        center: e.center,
        scale: e.scale,
        p: nodes,
        coeffs: ExpansionCoeffs::Complex(w),
    };
    // Self-test on a ring of targets inside the region of use.
    let mut worst = 0.0f64;
    let mut qref = 0.0f64;
    for i in 0..50 {
        let ang = 2.0 * std::f64::consts::PI * i as f64 / 50.0;
        let rad = 0.5 + 1.0 * (i as f64 / 50.0);
        let x = [
            e.center[0] + e.scale * rad * ang.cos(),
            e.center[1] + e.scale * rad * ang.sin(),
        ];
        let want = eval_expansion(e, x);
        let got = eval_expansion(&out, x);
        worst = worst.max((got - want).abs());
        qref = qref.max(want.abs());
    }
    if worst > eps * qref.max(1e-300) + eps {
        return Err(Error::AccuracyFailure(format!(
            "to_planewave: {nodes} nodes give error {worst:.3e} above {eps:.3e}"
        )));
    }
    Ok(out)
}

fn planewave_shift(e: &Expansion, target_center: Point) -> Expansion {
    let ExpansionCoeffs::Complex(w) = &e.coeffs else {
        unreachable!("planewave expansion stores complex weights")
    };
    let n = e.p;
    let kmax = pw_kmax(n);
    let z1 = (target_center[0] - e.center[0]) / e.scale;
    let z2 = (target_center[1] - e.center[1]) / e.scale;
    let mut out = w.clone();
    for i1 in 0..n {
        let k1 = pw_node(kmax, n, i1);
        for i2 in 0..n {
            let k2 = pw_node(kmax, n, i2);
            // Value is preserved: the phase references the new center.
            out[i1 * n + i2] *= Complex64::from_polar(1.0, k1 * z1 + k2 * z2);
        }
    }
    Expansion {
        kind: ExpansionKind::Planewave,
        center: target_center,
        scale: e.scale,
        p: n,
        coeffs: ExpansionCoeffs::Complex(out),
    }
}
