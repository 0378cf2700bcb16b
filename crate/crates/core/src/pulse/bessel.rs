//! Bessel functions of the first kind for integer order.

/// Evaluation strategy, exposed so results can be cross-checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BesselMethod {
    /// Power series; accurate for |x| ≤ 8.
    Series,
    /// Miller's downward recurrence normalized by `J0 + 2ΣJ_{2k} = 1`.
    Downward,
    /// Upward recurrence seeded by series values of J0 and J1 (stable for n < |x|).
    Upward,
}

/// `J_n(x)`: series for |x| ≤ 8, downward recurrence otherwise.
pub fn jn(n: u32, x: f64) -> f64 {
    if x.abs() <= 8.0 {
        jn_with(BesselMethod::Series, n, x)
    } else {
        jn_with(BesselMethod::Downward, n, x)
    }
}

pub fn j0(x: f64) -> f64 {
    jn(0, x)
}

pub fn j1(x: f64) -> f64 {
    jn(1, x)
}

pub fn jn_with(method: BesselMethod, n: u32, x: f64) -> f64 {
    match method {
        BesselMethod::Series => series(n, x),
        BesselMethod::Downward => downward(n, x),
        BesselMethod::Upward => upward(n, x),
    }
}

fn series(n: u32, x: f64) -> f64 {
    let h = x / 2.0;
    let mut term = 1.0;
    for k in 1..=n {
        term *= h / k as f64;
    }
    let h2 = h * h;
    let mut sum = term;
    for m in 1..200 {
        term *= -h2 / (m as f64 * (m + n) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

fn downward(n: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let ax = x.abs();
    let start = {
        let m = (n as f64).max(ax) as usize + 30 + (40.0 * ax.sqrt()) as usize;
        m + (m % 2)
    };
    let (mut jp1, mut j) = (0.0f64, 1e-300f64);
    let mut norm = 0.0;
    let mut want = 0.0;
    for k in (0..=start).rev() {
        if k as u32 == n {
            want = j;
        }
        if k == 0 {
            norm += j;
        } else if k % 2 == 0 {
            norm += 2.0 * j;
        }
        if k == 0 {
            break;
        }
        let jm1 = 2.0 * k as f64 / ax * j - jp1;
        jp1 = j;
        j = jm1;
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp1 *= 1e-250;
            want *= 1e-250;
            norm *= 1e-250;
        }
    }
    let v = want / norm;
    if x < 0.0 && n % 2 == 1 {
        -v
    } else {
        v
    }
}

fn upward(n: u32, x: f64) -> f64 {
    let (mut a, mut b) = (series(0, x), series(1, x));
    if n == 0 {
        return a;
    }
    for k in 1..n {
        let c = 2.0 * k as f64 / x * b - a;
        a = b;
        b = c;
    }
    b
}

/// Smallest positive root of `J0(x) − J1(x)` for the given evaluation method.
pub fn balance_root_with(method: BesselMethod) -> f64 {
    let f = |x: f64| jn_with(method, 0, x) - jn_with(method, 1, x);
    let (mut a, mut b) = (0.0f64, 2.0f64);
    debug_assert!(f(a) > 0.0 && f(b) < 0.0);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if f(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
        if b - a < 1e-15 {
            break;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        // Abramowitz & Stegun table 9.1.
        assert!((j0(1.0) - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((j1(1.0) - 0.440_050_585_744_933_5).abs() < 1e-15);
        assert!((j0(2.0) - 0.223_890_779_141_235_7).abs() < 1e-15);
        assert!((jn(2, 5.0) - 0.046_565_116_277_752_2).abs() < 1e-13);
        assert!((j0(10.0) - (-0.245_935_764_451_348_3)).abs() < 1e-12);
        assert!((j1(-1.0) + 0.440_050_585_744_933_5).abs() < 1e-15);
    }

    #[test]
    fn methods_agree() {
        for i in 0..80 {
            let x = 0.05 + 0.1 * i as f64;
            for n in 0..2 {
                let s = jn_with(BesselMethod::Series, n, x);
                assert!((s - jn_with(BesselMethod::Downward, n, x)).abs() < 1e-10, "n={n} x={x}");
                assert!((s - jn_with(BesselMethod::Upward, n, x)).abs() < 1e-12);
            }
        }
    }
}
