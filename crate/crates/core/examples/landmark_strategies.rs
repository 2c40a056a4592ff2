//! Kernel approximation error of each landmark strategy as C grows.

use nystrom_klr::data::{synth_generate, Nonlinearity};
use nystrom_klr::kernel::{gram, KernelConfig};
use nystrom_klr::landmarks::{select, LandmarkParams, Strategy};
use nystrom_klr::linalg::rel_frobenius;
use nystrom_klr::nystrom::{build, DEFAULT_PINV_THRESHOLD};

fn main() -> nystrom_klr::Result<()> {
    let data = synth_generate(600, 4, 3, Nonlinearity::RbfMixture, 3)?;
    let kernel = KernelConfig::rbf(0.25)?;
    let k = gram(&data.features, &data.features, &kernel)?;

    println!("{:>4} {:>14} {:>14} {:>14} {:>14}", "C", "uniform", "kmeans", "dac_leverage", "rls_leverage");
    for c in [10, 25, 50, 100, 200] {
        let mut row = format!("{c:>4}");
        for strategy in Strategy::ALL {
            let selection = select(&data.features, &LandmarkParams::new(strategy, c, 11), &kernel)?;
            let factor = build(&data.features, &selection, &kernel, DEFAULT_PINV_THRESHOLD)?;
            row += &format!(" {:>14.3e}", rel_frobenius(&factor.materialize()?, &k));
        }
        println!("{row}");
    }
    Ok(())
}
