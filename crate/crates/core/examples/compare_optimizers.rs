//! Fixed-budget comparison of the four optimizers on one reduced objective.

use nalgebra::DMatrix;
use nystrom_klr::data::{synth_generate, Nonlinearity};
use nystrom_klr::kernel::KernelConfig;
use nystrom_klr::klr::loss_grad_reduced;
use nystrom_klr::landmarks::select_uniform;
use nystrom_klr::nystrom::{build, DEFAULT_PINV_THRESHOLD};
use nystrom_klr::optim::{minimize, Method, OptConfig};

fn main() -> nystrom_klr::Result<()> {
    let data = synth_generate(400, 3, 3, Nonlinearity::RbfMixture, 21)?;
    let kernel = KernelConfig::rbf(0.25)?;
    let factor = build(&data.features, &select_uniform(data.len(), 50, 21)?, &kernel, DEFAULT_PINV_THRESHOLD)?;
    let lambda = 1e-6;
    let theta0 = DMatrix::zeros(factor.retained_rank, data.n_classes());

    for (method, delta0) in [(Method::Lbfgs, 1.0), (Method::Adam, 0.1), (Method::Momentum, 1.0), (Method::Gd, 1.0)] {
        let cfg = OptConfig {
            max_iters: 1000,
            tol: 0.0,
            delta0,
            log_every_iter: false,
            ..OptConfig::new(method)
        };
        match minimize(|t| loss_grad_reduced(&factor, t, &data.one_hot, lambda), &theta0, &cfg) {
            Ok((_, trace)) => println!(
                "{:>9}: loss {:.8} after {} iterations in {:.2}s",
                method.as_str(),
                trace.final_loss(),
                trace.iterations,
                trace.seconds()
            ),
            Err(e) => println!("{:>9}: {e}", method.as_str()),
        }
    }
    Ok(())
}
