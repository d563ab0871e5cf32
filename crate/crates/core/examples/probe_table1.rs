// temporary probe
use tfham::*;
use rug::Float;

fn run_a(alpha: &str, h: &str, n: usize, prec: u32) -> DeformationSequence {
    let params = BasisParams::new(
        parse_rational(alpha).unwrap(),
        parse_rational("1").unwrap(),
        parse_rational("1").unwrap(),
    ).unwrap();
    let cfg = HamConfig::new(params, parse_rational(h).unwrap(), n, NumericMode::Approx(prec)).unwrap();
    cfg.run().unwrap()
}

// [m,m] Pade of sum a_k p^k at p=1 via the normal equations, full precision.
fn pade_m(tail: &[Float], m: usize, prec: u32) -> f64 {
    let n = m;
    let mut a = vec![vec![Float::with_val(prec, 0); n]; n];
    let mut rhs = vec![Float::with_val(prec, 0); n];
    for i in 1..=n {
        for j in 1..=n {
            let idx = (m + i).wrapping_sub(j);
            a[i-1][j-1] = tail[idx].clone();
        }
        rhs[i-1] = -tail[m+i].clone();
    }
    // gaussian elimination, partial pivot
    for col in 0..n {
        let piv = (col..n).max_by(|&r1, &r2| a[r1][col].clone().abs().partial_cmp(&a[r2][col].clone().abs()).unwrap()).unwrap();
        a.swap(col, piv); rhs.swap(col, piv);
        for r in col+1..n {
            let f = Float::with_val(prec, &a[r][col] / &a[col][col]);
            for cc in col..n {
                let sub = Float::with_val(prec, &f * &a[col][cc]);
                a[r][cc] -= sub;
            }
            let sub = Float::with_val(prec, &f * &rhs[col]);
            rhs[r] -= sub;
        }
    }
    let mut b = vec![Float::with_val(prec, 0); n];
    for r in (0..n).rev() {
        let mut acc = rhs[r].clone();
        for cc in r+1..n {
            acc -= Float::with_val(prec, &a[r][cc] * &b[cc]);
        }
        b[r] = Float::with_val(prec, &acc / &a[r][r]);
    }
    // value at p=1: (sum_i c_i)/(1 + sum_j b_j), c_i = sum_j b_j a_{i-j}
    let mut den = Float::with_val(prec, 1);
    for v in &b { den += v; }
    let mut num = Float::with_val(prec, 0);
    for i in 0..=m {
        num += &tail[i];
        for (j, bv) in b.iter().enumerate() {
            if i >= j + 1 {
                num += Float::with_val(prec, bv * &tail[i - j - 1]);
            }
        }
    }
    (num / den).to_f64()
}

fn main() {
    for prec in [256u32, 320, 512] {
        let seq = run_a("3/4", "-4/5", 50, prec);
        print!("prec={prec}: ");
        for n in [10usize, 30, 40, 50] {
            print!("s{n}={:+.5} ", seq.partial_slope(n).unwrap().to_f64());
        }
        println!("c10={:+.4} c50={:+.4}", seq.partial_curvature(10).unwrap().to_f64(), seq.partial_curvature(50).unwrap().to_f64());
    }
    // Pade [10,10] target -1.58030 err 0.48933%
    for h in ["-3/4", "-4/5"] {
        let seq = run_a("3/4", h, 20, 512);
        let tail: Vec<Float> = seq.slope_contributions().iter().map(|c| c.to_real(512)).collect();
        println!("pade[10,10] h={h}: {:+.5}", pade_m(&tail, 10, 512));
    }
}
