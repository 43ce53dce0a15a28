//! Summary statistics for replication outputs.

/// Two-sided 97.5% quantile of Student's t with `df` degrees of freedom.
pub fn t975(df: u64) -> f64 {
    const SMALL: [f64; 5] = [
        12.706_204_736,
        4.302_652_73,
        3.182_446_305,
        2.776_445_105,
        2.570_581_836,
    ];
    match df {
        0 => f64::NAN,
        1..=5 => SMALL[df as usize - 1],
        _ => {
            // Cornish-Fisher expansion around the normal quantile.
            let z: f64 = 1.959_963_984_540_054;
            let n = df as f64;
            let z3 = z.powi(3);
            let z5 = z.powi(5);
            let z7 = z.powi(7);
            z + (z3 + z) / (4.0 * n)
                + (5.0 * z5 + 16.0 * z3 + 3.0 * z) / (96.0 * n * n)
                + (3.0 * z7 + 19.0 * z5 + 17.0 * z3 - 15.0 * z) / (384.0 * n * n * n)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub ci95_halfwidth: f64,
    pub min: f64,
    pub max: f64,
}

/// Mean, sample standard deviation and 95% CI half-width. Identical samples
/// give exactly zero spread.
pub fn summarize(xs: &[f64]) -> Summary {
    let n = xs.len();
    if n == 0 {
        return Summary {
            n,
            mean: f64::NAN,
            std: f64::NAN,
            ci95_halfwidth: f64::NAN,
            min: f64::NAN,
            max: f64::NAN,
        };
    }
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        return Summary {
            n,
            mean: min,
            std: 0.0,
            ci95_halfwidth: 0.0,
            min,
            max,
        };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let ci = if n > 1 {
        t975(n as u64 - 1) * std / (n as f64).sqrt()
    } else {
        0.0
    };
    Summary {
        n,
        mean,
        std,
        ci95_halfwidth: ci,
        min,
        max,
    }
}
