//! Cross-validated search over kernel width and regularization.

use nystrom_klr::data::{synth_generate, Nonlinearity};
use nystrom_klr::kernel::KernelConfig;
use nystrom_klr::landmarks::{LandmarkParams, Strategy};
use nystrom_klr::optim::{Method, OptConfig};
use nystrom_klr::pipeline::{grid_search, GridSpec, TrainOptions};

fn main() -> nystrom_klr::Result<()> {
    let data = synth_generate(600, 2, 3, Nonlinearity::RbfMixture, 12)?;
    let optimizer = OptConfig {
        max_iters: 300,
        log_every_iter: false,
        ..OptConfig::new(Method::Lbfgs)
    };
    let base = TrainOptions::new(KernelConfig::rbf(1.0)?, LandmarkParams::new(Strategy::Uniform, 60, 12), optimizer);
    let grid = GridSpec {
        kernel_c: vec![0.1, 0.5, 2.0],
        lambda: vec![1e-6, 1e-4, 1e-2],
        ..GridSpec::default()
    };
    let result = grid_search(&data, &base, &grid, 4, 12)?;
    for score in &result.scores {
        let p = &score.point;
        println!("c={:<4} lambda={:<8e} mean CEL {:.4}", p.kernel_c, p.lambda, score.mean_cel);
    }
    println!("best: c={} lambda={:e}", result.best.kernel_c, result.best.lambda);
    Ok(())
}
