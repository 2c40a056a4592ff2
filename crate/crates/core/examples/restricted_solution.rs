//! The unique minimizer inside L(K) when K is singular: duplicated rows
//! make the plain objective flat along null(K).

use nalgebra::DMatrix;
use nystrom_klr::data::{synth_generate, Nonlinearity};
use nystrom_klr::kernel::{gram, KernelConfig};
use nystrom_klr::klr::{kkt_residual, loss_full, restricted_solve_with, RestrictedOptions};

fn main() -> nystrom_klr::Result<()> {
    let base = synth_generate(120, 2, 3, Nonlinearity::RbfMixture, 4)?;
    let rows: Vec<usize> = (0..base.len()).chain(0..10).collect();
    let data = base.subset(&rows)?;
    let k = gram(&data.features, &data.features, &KernelConfig::rbf(0.3)?)?;
    let lambda = 1e-4;

    let sol = restricted_solve_with(&k, &data.one_hot, lambda, &RestrictedOptions::default())?;
    println!(
        "N={} retained rank {} loss {:.10} KKT residual {:.2e}",
        k.nrows(),
        sol.rank,
        sol.loss,
        kkt_residual(&k, &sol.aleph, &data.one_hot, lambda)?
    );

    // Moving mass between a row and its duplicate leaves Kα unchanged.
    let mut shifted = sol.aleph.clone();
    let nudge = DMatrix::from_row_slice(1, 3, &[1.0, -2.0, 0.5]);
    let (i, j) = (0, base.len());
    let row_i = shifted.row(i) + &nudge;
    let row_j = shifted.row(j) - &nudge;
    shifted.set_row(i, &row_i);
    shifted.set_row(j, &row_j);
    println!(
        "loss after a null-space move: {:.10}",
        loss_full(&k, &shifted, &data.one_hot, lambda)?
    );
    Ok(())
}
