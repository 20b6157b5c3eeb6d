// Checks reverse-mode gradients of a small graph against central differences.

use headprune::autodiff::{Graph, Tensor};
use headprune::oracles::{fd_gradient, reports_csv, OracleReport};
use headprune::Result;

fn loss(x: &[f64], w: &[f64]) -> Result<(f64, Vec<f64>)> {
    let mut g = Graph::new();
    let xn = g.leaf(&Tensor::param(vec![2, 3], x.to_vec())?);
    let wn = g.leaf(&Tensor::param(vec![3, 2], w.to_vec())?);
    let h = g.matmul(xn, wn)?;
    let h = g.gelu(h)?;
    let h = g.layer_norm_rows(h)?;
    let scale = g.constant(vec![2], vec![1.5, -0.5])?;
    let h = g.multiply(h, scale)?;
    let loss = g.cross_entropy(h, &[0, 1])?;
    g.backward(loss)?;
    Ok((g.value(loss)[0], g.grad(xn).unwrap_or(&[0.0; 6]).to_vec()))
}

pub fn run_example() -> Result<()> {
    let x = [0.3, -1.2, 0.8, 1.5, 0.1, -0.4];
    let w = [0.5, -0.3, 0.9, 0.2, -0.7, 1.1];
    let (_, analytic) = loss(&x, &w)?;
    let numeric = fd_gradient(|v| loss(v, &w).map(|r| r.0).unwrap_or(f64::NAN), &x, &(0..6).collect::<Vec<_>>(), 1e-4)?;
    let reports: Vec<OracleReport> = analytic
        .iter()
        .zip(&numeric)
        .enumerate()
        .map(|(i, (a, n))| OracleReport::relative(format!("x[{i}]"), *n, *a, 1e-3, 1e-6))
        .collect();
    print!("{}", reports_csv(&reports));
    assert!(reports.iter().all(|r| r.pass));
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
