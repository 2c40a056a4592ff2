//! Build a factor, use it as a matrix-free K̂, and check it against the
//! materialized approximation and the exact Gram matrix.

use nalgebra::DMatrix;
use nystrom_klr::data::{synth_generate, Nonlinearity};
use nystrom_klr::kernel::{gram, KernelConfig};
use nystrom_klr::landmarks::select_uniform;
use nystrom_klr::linalg::{max_abs, rel_frobenius};
use nystrom_klr::nystrom::{build, DEFAULT_PINV_THRESHOLD};

fn main() -> nystrom_klr::Result<()> {
    let data = synth_generate(500, 3, 2, Nonlinearity::Linear, 5)?;
    let kernel = KernelConfig::rbf(0.5)?;
    let selection = select_uniform(data.len(), 60, 5)?;
    let factor = build(&data.features, &selection, &kernel, DEFAULT_PINV_THRESHOLD)?;
    println!(
        "N={} C={} retained rank {} of W",
        factor.n(),
        factor.n_columns(),
        factor.retained_rank
    );

    let k_hat = factor.materialize()?;
    let alpha = DMatrix::from_fn(factor.n(), 2, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0);
    let applied = factor.apply(&alpha)?;
    println!("apply vs materialized product: {:.2e}", max_abs(&(applied - &k_hat * &alpha)));

    let k = gram(&data.features, &data.features, &kernel)?;
    println!("relative Frobenius error of K̂: {:.3e}", rel_frobenius(&k_hat, &k));

    let full = select_uniform(data.len(), data.len(), 0)?;
    let exact = build(&data.features, &full, &kernel, DEFAULT_PINV_THRESHOLD)?;
    println!("all columns: {:.3e}", rel_frobenius(&exact.materialize()?, &k));
    Ok(())
}
