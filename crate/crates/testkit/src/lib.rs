//! Independent numerical oracles for the test suites: Gauss-Legendre
//! quadrature, a phase-space mixture model of thermal dressing, Monte Carlo
//! kernel averaging, and brute-force likelihood maximization. Everything here
//! deliberately avoids the main crate so the two routes share no code.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Nodes and weights of the n-point Gauss-Legendre rule on [a, b], found by
/// Newton iteration on the Legendre polynomial.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    assert!(n >= 2);
    let nf = n as f64;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w));
    }
    out
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// No-click probability of a signal mixed with same-mode thermal light of
/// mean `nbar`, seen by an on/off detector of efficiency `eta`.
///
/// Computed from first principles: the thermal field is a Gaussian-weighted
/// mixture of coherent displacements, so each signal component |n> becomes a
/// mixture of displaced number states, whose photon-number moments are summed
/// against (1-eta)^k directly. No closed-form shortcut is used.
pub fn thermal_mixture_no_click(probs: &[f64], eta: f64, nbar: f64) -> f64 {
    assert!(!probs.is_empty());
    if nbar == 0.0 {
        return probs
            .iter()
            .enumerate()
            .map(|(n, p)| p * (1.0 - eta).powi(n as i32))
            .sum();
    }
    let nmax = probs.len() - 1;
    let upper = (30.0 * nbar).max(3.0);
    let mut total = 0.0;
    for (x, w) in gauss_legendre(200, 0.0, upper) {
        let s = displaced_fock_no_click(x, eta, nmax);
        let weight = w * (-x / nbar).exp() / nbar;
        for (p, sn) in probs.iter().zip(&s) {
            total += weight * p * sn;
        }
    }
    total
}

// For displacement amplitude beta = sqrt(x), returns sum_k |<k|D(beta)|n>|^2
// (1-eta)^k for n = 0..=nmax, via the recurrence
// c_k(n) = (sqrt(k) c_{k-1}(n-1) - beta c_k(n-1)) / sqrt(n)
// from the coherent-state amplitudes c_k(0).
fn displaced_fock_no_click(x: f64, eta: f64, nmax: usize) -> Vec<f64> {
    let beta = x.sqrt();
    let nmaxf = nmax as f64;
    let kcut = (x + nmaxf + 12.0 * ((2.0 * nmaxf + 1.0) * x + 1.0).sqrt() + 30.0).ceil() as usize;
    let mut c = vec![0.0f64; kcut + 1];
    c[0] = (-x / 2.0).exp();
    for k in 1..=kcut {
        c[k] = c[k - 1] * beta / (k as f64).sqrt();
    }
    let q = 1.0 - eta;
    let mut out = Vec::with_capacity(nmax + 1);
    out.push(weighted_norm(&c, q));
    let mut prev = c;
    for n in 1..=nmax {
        let rn = 1.0 / (n as f64).sqrt();
        let mut next = vec![0.0f64; kcut + 1];
        next[0] = -beta * prev[0] * rn;
        for k in 1..=kcut {
            next[k] = ((k as f64).sqrt() * prev[k - 1] - beta * prev[k]) * rn;
        }
        out.push(weighted_norm(&next, q));
        prev = next;
    }
    out
}

fn weighted_norm(c: &[f64], q: f64) -> f64 {
    let mut pw = 1.0;
    let mut acc = 0.0;
    for v in c {
        acc += v * v * pw;
        pw *= q;
    }
    acc
}

fn standard_normal(rng: &mut impl Rng) -> f64 {
    // Box-Muller, chosen over a library sampler to keep this route separate.
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Monte Carlo estimate of the thermal no-click kernel averaged over a
/// truncated normal noise level: `draws` rejection-sampled levels, each
/// contributing t (1 - eta t)^n with t = 1/(1 + eta nbar).
pub fn mc_averaged_kernel(
    eta: f64,
    mean: f64,
    variance: f64,
    max_photons: usize,
    draws: u64,
    seed: u64,
) -> Vec<f64> {
    let sigma = variance.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = vec![0.0; max_photons + 1];
    for _ in 0..draws {
        let nbar = loop {
            let x = mean + sigma * standard_normal(&mut rng);
            if x >= 0.0 {
                break x;
            }
        };
        let t = 1.0 / (1.0 + eta * nbar);
        let base = 1.0 - eta * t;
        let mut r = t;
        for a in acc.iter_mut() {
            *a += r;
            r *= base;
        }
    }
    for a in acc.iter_mut() {
        *a /= draws as f64;
    }
    acc
}

/// Brute-force maximum of the binomial log-likelihood over the probability
/// simplex sampled on a regular grid of the given step. Supports dimensions 2
/// and 3; records are (trials, no_clicks) aligned with the kernels. Returns
/// the best grid point and its log-likelihood.
pub fn grid_ml(
    kernels: &[Vec<f64>],
    records: &[(u64, u64)],
    dim: usize,
    step: f64,
) -> (Vec<f64>, f64) {
    assert!(dim == 2 || dim == 3);
    assert_eq!(kernels.len(), records.len());
    let steps = (1.0 / step).round() as usize;
    let mut best = vec![0.0; dim];
    let mut best_ll = f64::NEG_INFINITY;
    let mut consider = |probs: &[f64]| {
        let v = grid_log_likelihood(kernels, records, probs);
        if v > best_ll {
            best_ll = v;
            best = probs.to_vec();
        }
    };
    if dim == 2 {
        for i in 0..=steps {
            let p0 = i as f64 * step;
            consider(&[p0, 1.0 - p0]);
        }
    } else {
        for i in 0..=steps {
            for j in 0..=(steps - i) {
                let p0 = i as f64 * step;
                let p1 = j as f64 * step;
                consider(&[p0, p1, (1.0 - p0 - p1).max(0.0)]);
            }
        }
    }
    (best, best_ll)
}

/// Direct binomial log-likelihood used by the grid search; impossible
/// observations give negative infinity.
pub fn grid_log_likelihood(kernels: &[Vec<f64>], records: &[(u64, u64)], probs: &[f64]) -> f64 {
    let mut total = 0.0;
    for (kernel, &(n, s)) in kernels.iter().zip(records) {
        let p: f64 = kernel.iter().zip(probs).map(|(r, q)| r * q).sum();
        let (n, s) = (n as f64, s as f64);
        if s > 0.0 {
            if p <= 0.0 {
                return f64::NEG_INFINITY;
            }
            total += s * p.min(1.0).ln();
        }
        if s < n {
            if p >= 1.0 {
                return f64::NEG_INFINITY;
            }
            total += (n - s) * (1.0 - p).ln();
        }
    }
    total
}
