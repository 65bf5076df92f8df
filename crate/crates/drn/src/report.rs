//! CSV renderings of a training report.

use drn_core::trainer::TrainReport;

use crate::dataset::fmt_f64;

fn to_csv(rows: Vec<Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    for row in rows {
        w.write_record(&row).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flushing to memory")).expect("utf-8 input")
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// One row per epoch: objective, mean batch loss, covariance residual and
/// per-task plus mean accuracies. Contains no timings, so it is
/// reproducible byte for byte.
pub fn report_csv(report: &TrainReport) -> String {
    let has_test = report.epochs.iter().all(|e| e.test_accuracy.is_some()) && !report.epochs.is_empty();
    let mut header: Vec<String> = ["epoch", "objective", "mean_batch_loss", "cov_residual"]
        .map(String::from)
        .to_vec();
    let mut splits = vec!["train"];
    if has_test {
        splits.push("test");
    }
    for s in &splits {
        header.extend(report.task_names.iter().map(|n| format!("{s}_acc_{n}")));
        header.push(format!("{s}_acc_mean"));
    }
    let mut rows = vec![header];
    for e in &report.epochs {
        let mut row = vec![
            e.epoch.to_string(),
            fmt_f64(e.objective),
            fmt_f64(e.mean_batch_loss),
            fmt_f64(e.cov_residual),
        ];
        let mut accs = vec![&e.train_accuracy];
        if let (true, Some(t)) = (has_test, &e.test_accuracy) {
            accs.push(t);
        }
        for a in accs {
            row.extend(a.iter().map(|v| fmt_f64(*v)));
            row.push(fmt_f64(mean(a)));
        }
        rows.push(row);
    }
    to_csv(rows)
}

/// Seconds spent per epoch in the SGD pass and in the covariance update.
pub fn timings_csv(report: &TrainReport) -> String {
    let mut rows = vec![vec!["epoch".into(), "sgd_seconds".into(), "cov_seconds".into()]];
    rows.extend(
        report
            .epochs
            .iter()
            .map(|e| vec![e.epoch.to_string(), fmt_f64(e.sgd_seconds), fmt_f64(e.cov_seconds)]),
    );
    to_csv(rows)
}
