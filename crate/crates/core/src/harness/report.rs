use super::ExperimentReport;
use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter};
use std::io;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Json,
    Csv,
}

/// Compact JSON with every float written as 17 significant digits.
struct RoundTripFloats;

impl Formatter for RoundTripFloats {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    fn write_null<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        CompactFormatter.write_null(writer)
    }
}

/// Serialize any value with the report float format.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, RoundTripFloats);
    value
        .serialize(&mut ser)
        .expect("in-memory serialization cannot fail");
    out.push(b'\n');
    out
}

fn float_cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v:.16e}"))
}

/// JSON document or the per-trial CSV table (one row per trial and estimator).
pub fn export_report(r: &ExperimentReport, format: ExportFormat) -> Vec<u8> {
    match format {
        ExportFormat::Json => to_json_bytes(r),
        ExportFormat::Csv => {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(Vec::new());
            w.write_record([
                "trial",
                "estimator",
                "labeling_error",
                "clustering_error",
                "linf_ability",
                "mse_ability",
                "iterations",
                "flipped",
                "failed",
            ])
            .expect("in-memory csv");
            for t in &r.trials {
                for o in &t.outcomes {
                    w.write_record([
                        t.trial.to_string(),
                        o.estimator.clone(),
                        float_cell(o.errors.map(|e| e.labeling_error)),
                        float_cell(o.errors.map(|e| e.clustering_error)),
                        float_cell(o.linf_ability),
                        float_cell(o.mse_ability),
                        o.iterations.to_string(),
                        o.flipped.to_string(),
                        o.failed.is_some().to_string(),
                    ])
                    .expect("in-memory csv");
                }
            }
            w.into_inner().expect("in-memory csv")
        }
    }
}
