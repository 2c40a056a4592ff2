//! Eigenvalue decay of a Gram matrix and its power-law fit, compared with
//! the best rank-C approximation error.

use nystrom_klr::bounds::{best_rank_sketch, log_grid, spectrum};
use nystrom_klr::data::{synth_generate, Nonlinearity};
use nystrom_klr::kernel::{gram, KernelConfig};

fn main() -> nystrom_klr::Result<()> {
    let data = synth_generate(400, 3, 2, Nonlinearity::Linear, 9)?;
    for c in [0.1, 0.5, 2.0] {
        let k = gram(&data.features, &data.features, &KernelConfig::rbf(c)?)?;
        let report = spectrum(&k)?;
        println!(
            "kernel c={c}: sigma_(C+1) ~ {:.3e} / C^{:.3} (log-log r = {:.3}, {} points{})",
            report.fit_a,
            report.fit_b,
            report.log_log_correlation,
            report.fit_points,
            if report.degenerate { ", degenerate" } else { "" }
        );
        let rank_k = report.singular_values.iter().filter(|&&s| s > 1e-10 * report.singular_values[0]).count();
        for rank in log_grid(rank_k - 1, 5) {
            let approx = best_rank_sketch(&k, rank)?.materialize()?;
            let err = (&k - approx).norm();
            let tail: f64 = report.singular_values[rank..].iter().map(|s| s * s).sum::<f64>().sqrt();
            println!(
                "  C={rank:>3}: sigma_(C+1) {:.3e}, predicted {:.3e}, best-rank error {err:.3e} (tail {tail:.3e})",
                report.singular_values[rank],
                report.predicted(rank)
            );
        }
    }
    Ok(())
}
