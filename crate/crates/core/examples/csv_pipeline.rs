//! CSV in, model.json out, then reload the model and score new rows.

use nystrom_klr::data::{load_csv, split, synth_generate, write_csv, CsvOptions, Nonlinearity, SplitSpec};
use nystrom_klr::kernel::KernelConfig;
use nystrom_klr::klr::TrainedModel;
use nystrom_klr::landmarks::{LandmarkParams, Strategy};
use nystrom_klr::metrics::EvalReport;
use nystrom_klr::optim::{Method, OptConfig};
use nystrom_klr::pipeline::{train_and_evaluate, TrainOptions};

fn main() -> nystrom_klr::Result<()> {
    let dir = std::env::temp_dir().join("nklr-csv-example");
    std::fs::create_dir_all(&dir)?;
    let (train_path, test_path) = (dir.join("train.csv"), dir.join("test.csv"));
    let (train, test) = split(&synth_generate(1000, 3, 4, Nonlinearity::RbfMixture, 1)?, &SplitSpec::new(0.8, 1))?;
    write_csv(&train_path, &train, "choice")?;
    write_csv(&test_path, &test, "choice")?;

    let csv = CsvOptions::new("choice");
    let train = load_csv(&train_path, &csv)?;
    let test = load_csv(&test_path, &csv)?;
    let optimizer = OptConfig {
        log_every_iter: false,
        ..OptConfig::new(Method::Lbfgs)
    };
    let mut opts = TrainOptions::new(KernelConfig::rbf(0.3)?, LandmarkParams::new(Strategy::Uniform, 80, 0), optimizer);
    opts.lambda = 1e-4;
    let run = train_and_evaluate(&train, None, &opts, None)?;

    let model_path = dir.join("model.json");
    run.outcome.model.save(&model_path)?;
    let model = TrainedModel::load(&model_path)?;
    let test = test.align_classes(&model.class_names)?;
    let (prob, predicted) = model.predict(&test.features)?;
    let report = EvalReport::compute(&prob, &test.labels, &model.class_names)?;
    println!("model written to {}", model_path.display());
    println!("first predictions: {:?}", &predicted[..10]);
    println!("test: {}", report.summary());
    Ok(())
}
