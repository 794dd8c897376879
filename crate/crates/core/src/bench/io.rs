use std::io::{Read, Write};
use std::path::Path;

use super::BenchError;
use crate::gep::{SystemSpec, TimeSeriesTable};

/// Column name of generator `name`'s capacity factor.
pub fn factor_column(name: &str) -> String {
    format!("F_{name}")
}

/// Reads `step,F_<gen>...,D,price` rows.
///
/// Columns may come in any order. Capacity factors of non-VRE generators
/// default to 1.0 and `price` defaults to 0 when market participation is
/// off; any other missing column is an error. Errors name the file line.
pub fn read_timeseries<R: Read>(reader: R, spec: &SystemSpec) -> Result<TimeSeriesTable, BenchError> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    let find = |name: &str| header.iter().position(|h| h == name);

    let mut missing = Vec::new();
    let factor_cols: Vec<Option<usize>> = spec
        .generators
        .iter()
        .map(|g| {
            let col = find(&factor_column(&g.name));
            if col.is_none() && g.is_vre {
                missing.push(factor_column(&g.name));
            }
            col
        })
        .collect();
    let demand_col = find("D");
    if demand_col.is_none() {
        missing.push("D".into());
    }
    let price_col = find("price");
    if price_col.is_none() && spec.market_participation {
        missing.push("price".into());
    }
    if !missing.is_empty() {
        return Err(BenchError::Schema(format!("missing columns: {}", missing.join(", "))));
    }
    let step_col = find("step");

    let ng = spec.generators.len();
    let mut factors: Vec<Vec<f64>> = vec![Vec::new(); ng];
    let mut demand = Vec::new();
    let mut price = Vec::new();
    for (row, rec) in rd.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(row as u64 + 2, |p| p.line());
        let field = |col: usize| -> Result<f64, BenchError> {
            let raw = rec.get(col).unwrap_or("");
            raw.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| BenchError::Parse {
                line,
                column: header[col].clone(),
                message: format!("not a finite number: {raw:?}"),
            })
        };
        if let Some(c) = step_col {
            let raw = rec.get(c).unwrap_or("");
            if raw.parse::<u64>().is_err() {
                return Err(BenchError::Parse {
                    line,
                    column: "step".into(),
                    message: format!("not a step index: {raw:?}"),
                });
            }
        }
        for (g, col) in factor_cols.iter().enumerate() {
            let v = match col {
                Some(c) => field(*c)?,
                None => 1.0,
            };
            if !(0.0..=1.0).contains(&v) {
                return Err(BenchError::Parse {
                    line,
                    column: factor_column(&spec.generators[g].name),
                    message: format!("capacity factor {v} outside [0, 1]"),
                });
            }
            factors[g].push(v);
        }
        let d = field(demand_col.expect("checked"))?;
        if d < 0.0 {
            return Err(BenchError::Parse { line, column: "D".into(), message: format!("negative demand {d}") });
        }
        demand.push(d);
        price.push(match price_col {
            Some(c) => field(c)?,
            None => 0.0,
        });
    }
    let ts = TimeSeriesTable { capacity_factors: factors, demand, price };
    ts.check_against(spec)?;
    Ok(ts)
}

pub fn load_timeseries(path: &Path, spec: &SystemSpec) -> Result<TimeSeriesTable, BenchError> {
    let file = std::fs::File::open(path).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
    read_timeseries(file, spec)
}

/// Writes every column in shortest round-trip decimal notation.
pub fn write_timeseries<W: Write>(writer: W, spec: &SystemSpec, ts: &TimeSeriesTable) -> Result<(), BenchError> {
    let mut wr = csv::Writer::from_writer(writer);
    let mut header = vec!["step".to_string()];
    header.extend(spec.generators.iter().map(|g| factor_column(&g.name)));
    header.push("D".into());
    header.push("price".into());
    wr.write_record(&header)?;
    for t in 0..ts.horizon() {
        let mut rec = vec![t.to_string()];
        rec.extend(ts.capacity_factors.iter().map(|f| f[t].to_string()));
        rec.push(ts.demand[t].to_string());
        rec.push(ts.price[t].to_string());
        wr.write_record(&rec)?;
    }
    wr.flush().map_err(|e| BenchError::Io(e.to_string()))?;
    Ok(())
}

pub fn emit_timeseries(path: &Path, spec: &SystemSpec, ts: &TimeSeriesTable) -> Result<(), BenchError> {
    let file = std::fs::File::create(path).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
    write_timeseries(std::io::BufWriter::new(file), spec, ts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gep::fixtures::*;

    fn two_gen() -> SystemSpec {
        spec(vec![thermal(130.0, 1e5), pv(1.0, 8e4)], vec![])
    }

    #[test]
    fn well_formed_file() {
        let text = "step,F_pv,D,price\n0,0.0,10,5\n1,0.5,12.5,6\n2,1,9,7\n";
        let ts = read_timeseries(text.as_bytes(), &two_gen()).unwrap();
        assert_eq!(ts.horizon(), 3);
        assert_eq!(ts.capacity_factors[0], vec![1.0; 3]);
        assert_eq!(ts.capacity_factors[1], vec![0.0, 0.5, 1.0]);
        assert_eq!(ts.price, vec![5.0, 6.0, 7.0]);
    }

    #[test]
    fn out_of_range_factor_names_line() {
        let text = "step,F_pv,D\n0,0.5,10\n1,1.2,10\n";
        let err = read_timeseries(text.as_bytes(), &two_gen()).unwrap_err();
        match err {
            BenchError::Parse { line, column, .. } => {
                assert_eq!(line, 3);
                assert_eq!(column, "F_pv");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn price_optional_only_without_market() {
        let text = "step,F_pv,D\n0,0.5,10\n";
        let mut s = two_gen();
        assert_eq!(read_timeseries(text.as_bytes(), &s).unwrap().price, vec![0.0]);
        s.market_participation = true;
        let err = read_timeseries(text.as_bytes(), &s).unwrap_err().to_string();
        assert!(err.contains("price"), "{err}");
        let err = read_timeseries("step,D\n0,1\n".as_bytes(), &two_gen()).unwrap_err().to_string();
        assert!(err.contains("F_pv"), "{err}");
    }

    #[test]
    fn bad_number() {
        let err = read_timeseries("F_pv,D\n0.5,abc\n".as_bytes(), &two_gen()).unwrap_err();
        assert!(matches!(err, BenchError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn emit_then_load_is_exact() {
        let s = two_gen();
        let ts = series(
            vec![vec![1.0; 3], vec![0.1 + 0.2, 1.0 / 3.0, 1e-300]],
            vec![std::f64::consts::PI * 1e7, 0.0, 123456.789e-5],
        );
        let mut buf = Vec::new();
        write_timeseries(&mut buf, &s, &ts).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let cells = text.lines().skip(1).flat_map(|l| l.split(','));
        assert!(cells.clone().all(|c| !c.contains('e')), "fixed notation expected: {text}");
        assert_eq!(read_timeseries(&buf[..], &s).unwrap(), ts);
    }
}
