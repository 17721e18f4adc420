//! Golden-section minimization on a bracket.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Minimizes a unimodal `f` on `[a, b]` until the bracket is below `tol·|x|`.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> Minimum {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut evaluations = 2;
    while (b - a).abs() > tol * (c.abs() + d.abs()) * 0.5 && evaluations < 400 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        evaluations += 1;
    }
    if fc < fd {
        Minimum { x: c, value: fc, evaluations }
    } else {
        Minimum { x: d, value: fd, evaluations }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parabola() {
        let m = golden_section(|x| (x - 1.3).powi(2) + 2.0, 0.0, 5.0, 1e-10);
        assert!((m.x - 1.3).abs() < 1e-7);
        assert!((m.value - 2.0).abs() < 1e-14);
    }
}
