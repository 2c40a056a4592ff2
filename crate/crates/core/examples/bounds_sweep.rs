//! Parameter-error bound against the observed restricted-solution error
//! over a range of landmark counts.

use nystrom_klr::bounds::{write_bound_csv, BoundContext, NormOrder};
use nystrom_klr::data::{synth_generate, Nonlinearity};
use nystrom_klr::kernel::{gram, KernelConfig};
use nystrom_klr::klr::RestrictedOptions;
use nystrom_klr::landmarks::{select, LandmarkParams, Strategy};
use nystrom_klr::nystrom::{build, DEFAULT_PINV_THRESHOLD};

fn main() -> nystrom_klr::Result<()> {
    let data = synth_generate(300, 4, 3, Nonlinearity::RbfMixture, 31)?;
    let kernel = KernelConfig::rbf(0.25)?;
    let k = gram(&data.features, &data.features, &kernel)?;
    let ctx = BoundContext::new(&k, &data.one_hot, 1e-3, RestrictedOptions::default())?;
    println!("retained rank of K: {}", ctx.rank);

    let mut reports = Vec::new();
    for c in [5, 10, 20, 40, 80, 160] {
        let selection = select(&data.features, &LandmarkParams::new(Strategy::Kmeans, c, 31), &kernel)?;
        let factor = build(&data.features, &selection, &kernel, DEFAULT_PINV_THRESHOLD)?;
        let report = ctx.report(&factor, NormOrder::Two)?;
        assert!(report.holds());
        reports.push(report);
    }
    write_bound_csv(&reports, std::io::stdout())
}
