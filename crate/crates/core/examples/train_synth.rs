//! Train reduced-form Nyström KLR on a synthetic nonlinear dataset and
//! score the held-out split.

use nystrom_klr::data::{synth_generate, Nonlinearity, SplitSpec};
use nystrom_klr::kernel::KernelConfig;
use nystrom_klr::landmarks::{LandmarkParams, Strategy};
use nystrom_klr::optim::{Method, OptConfig};
use nystrom_klr::pipeline::{split_train_evaluate, TrainOptions};

fn main() -> nystrom_klr::Result<()> {
    let data = synth_generate(2000, 2, 3, Nonlinearity::RbfMixture, 7)?;
    let optimizer = OptConfig {
        max_iters: 1000,
        log_every_iter: false,
        ..OptConfig::new(Method::Lbfgs)
    };
    let mut opts = TrainOptions::new(KernelConfig::rbf(0.5)?, LandmarkParams::new(Strategy::Kmeans, 100, 7), optimizer);
    opts.lambda = 1e-4;

    let run = split_train_evaluate(&data, &SplitSpec::new(0.8, 7), &opts)?;
    let trace = &run.outcome.trace;
    println!(
        "{} iterations, final loss {:.6} ({:?})",
        trace.iterations,
        trace.final_loss(),
        trace.termination
    );
    println!("train: {}", run.train_report.summary());
    if let Some(test) = &run.test_report {
        println!("test:  {}", test.summary());
    }
    Ok(())
}
