//! CSV inputs and outputs of the analysis tools.

use std::io::{Read, Write};

use crate::neuron::{Property, TrainableMask};

use super::{AnalysisError, FiringTable, FitResult, ShapleyReport, COALITIONS};

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(r)
}

/// One sample per row in the first column. A non-numeric first row is a header.
pub fn read_samples_csv<R: Read>(r: R) -> Result<Vec<f64>, AnalysisError> {
    let mut out = Vec::new();
    for (i, rec) in reader(r).records().enumerate() {
        let rec = rec?;
        let Some(field) = rec.get(0).filter(|f| !f.is_empty()) else {
            continue;
        };
        match field.parse::<f64>() {
            Ok(x) => out.push(x),
            Err(_) if i == 0 => {}
            Err(e) => {
                return Err(AnalysisError::Parse {
                    line: i + 1,
                    message: format!("{field:?}: {e}"),
                })
            }
        }
    }
    Ok(out)
}

/// Rows `mask,mean[,sd]` with `mask` a 4-character bit string in property
/// order (`tau_m v_th v_rest R`). A first row whose mask does not parse is a header.
pub fn read_coalition_csv<R: Read>(
    r: R,
) -> Result<([Option<f64>; COALITIONS], Option<[f64; COALITIONS]>), AnalysisError> {
    let mut table = [None; COALITIONS];
    let mut sd = [0.0; COALITIONS];
    let mut any_sd = false;
    for (i, rec) in reader(r).records().enumerate() {
        let rec = rec?;
        let line = i + 1;
        let mask = rec.get(0).unwrap_or("");
        let Some(m) = TrainableMask::parse_bit_string(mask) else {
            if i == 0 {
                continue;
            }
            return Err(AnalysisError::Parse {
                line,
                message: format!("bad mask {mask:?}"),
            });
        };
        let num = |col: usize| -> Result<Option<f64>, AnalysisError> {
            match rec.get(col).filter(|f| !f.is_empty()) {
                None => Ok(None),
                Some(f) => f
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|e| AnalysisError::Parse {
                        line,
                        message: format!("{f:?}: {e}"),
                    }),
            }
        };
        let mean = num(1)?.ok_or_else(|| AnalysisError::Parse {
            line,
            message: "missing mean".into(),
        })?;
        table[m.bits() as usize] = Some(mean);
        if let Some(s) = num(2)? {
            sd[m.bits() as usize] = s;
            any_sd = true;
        }
    }
    Ok((table, any_sd.then_some(sd)))
}

/// Fit table: one column per data set, rows `(family, parameter)`.
pub fn write_fit_csv<W: Write>(
    w: W,
    columns: &[(String, FitResult, FitResult)],
) -> Result<(), AnalysisError> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["distribution".to_string(), "parameter".to_string()];
    header.extend(columns.iter().map(|c| c.0.clone()));
    wr.write_record(&header)?;
    let rows: [(&str, &str, fn(&(String, FitResult, FitResult)) -> f64); 7] = [
        ("gamma", "shape", |c| c.1.shape),
        ("gamma", "scale", |c| c.1.scale),
        ("gamma", "log_likelihood", |c| c.1.log_likelihood),
        ("lognormal", "shape", |c| c.2.shape),
        ("lognormal", "scale", |c| c.2.scale),
        ("lognormal", "log_likelihood", |c| c.2.log_likelihood),
        ("all", "n", |c| c.1.n as f64),
    ];
    for (family, param, get) in rows {
        let mut rec = vec![family.to_string(), param.to_string()];
        rec.extend(columns.iter().map(|c| get(c).to_string()));
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_shapley_csv<W: Write>(w: W, report: &ShapleyReport) -> Result<(), AnalysisError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["property", "value", "normalized"])?;
    let norm = report.normalized();
    for (i, p) in Property::ALL.iter().enumerate() {
        wr.write_record([
            p.name().to_string(),
            report.values[i].to_string(),
            norm[i].to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// Neuron-by-class matrix of firing rates.
pub fn write_firing_csv<W: Write>(w: W, table: &FiringTable) -> Result<(), AnalysisError> {
    let mut wr = csv::Writer::from_writer(w);
    let classes = table.rates.first().map_or(0, Vec::len);
    let mut header = vec!["neuron".to_string()];
    header.extend((0..classes).map(|c| format!("class_{c}")));
    wr.write_record(&header)?;
    for (n, row) in table.neurons.iter().zip(&table.rates) {
        let mut rec = vec![n.to_string()];
        rec.extend(row.iter().map(f64::to_string));
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}
