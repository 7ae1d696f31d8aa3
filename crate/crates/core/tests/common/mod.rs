#![allow(dead_code)]

/// Mean and standard error of a sample.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Second moment about zero with its standard error.
pub fn second_moment(xs: &[f64]) -> (f64, f64) {
    let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
    mean_se(&sq)
}
