use crate::error::{Error, Result};
use crate::grid::network::{Branch, Bus, GridNetwork};
use crate::scalar::Scalar;

/// Parses a case file in either supported format and returns a validated
/// network.
///
/// Two formats are recognized:
/// - a MATPOWER subset: `mpc.baseMVA`, `mpc.bus` (columns bus id, type,
///   Pd, Qd in MW/MVAr; type 3 marks the substation) and `mpc.branch`
///   (columns from, to, r, x in per-unit). Loads become negative scheduled
///   injections in per-unit; all other MATPOWER content is ignored.
/// - a native line-oriented format with `[buses]` (id, is_substation,
///   p_sched, q_sched) and `[branches]` (id, from, to, r, x) sections,
///   everything already in per-unit, `#` comments allowed.
pub fn parse_case<T: Scalar>(text: &str) -> Result<GridNetwork<T>> {
    if text.contains("mpc.") {
        parse_matpower(text)
    } else {
        parse_native(text)
    }
}

fn numbers(line: &str, lineno: usize) -> Result<Vec<f64>> {
    line.trim()
        .trim_end_matches(';')
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| Error::parse(lineno, format!("expected a number, found `{tok}`")))
        })
        .collect()
}

fn parse_matpower<T: Scalar>(text: &str) -> Result<GridNetwork<T>> {
    #[derive(PartialEq)]
    enum Block {
        None,
        Bus,
        Branch,
        Skip,
    }
    let mut base_mva = None;
    let mut bus_rows: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut branch_rows: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut block = Block::None;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('%').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if block != Block::None {
            if line.starts_with("];") || line == "]" {
                block = Block::None;
                continue;
            }
            match block {
                Block::Bus => bus_rows.push((lineno, numbers(line, lineno)?)),
                Block::Branch => branch_rows.push((lineno, numbers(line, lineno)?)),
                _ => {}
            }
            continue;
        }
        if let Some(rest) = line.strip_prefix("mpc.baseMVA") {
            let value = rest.trim_start_matches(['=', ' ']).trim_end_matches(';');
            base_mva = Some(value.trim().parse::<f64>().map_err(|_| {
                Error::parse(lineno, format!("bad baseMVA value `{}`", value.trim()))
            })?);
        } else if line.starts_with("mpc.bus") && line.contains('[') {
            block = Block::Bus;
        } else if line.starts_with("mpc.branch") && line.contains('[') {
            block = Block::Branch;
        } else if line.starts_with("mpc.") && line.contains('[') && !line.contains(']') {
            block = Block::Skip;
        }
    }
    let base = base_mva.ok_or_else(|| Error::parse(0, "missing mpc.baseMVA"))?;
    if bus_rows.is_empty() {
        return Err(Error::parse(0, "missing mpc.bus block"));
    }
    if branch_rows.is_empty() {
        return Err(Error::parse(0, "missing mpc.branch block"));
    }

    let mut buses = Vec::with_capacity(bus_rows.len());
    for (lineno, row) in bus_rows {
        if row.len() < 4 {
            return Err(Error::parse(
                lineno,
                format!("bus row needs at least 4 columns, found {}", row.len()),
            ));
        }
        buses.push(Bus {
            id: row[0] as usize,
            is_substation: row[1] as i64 == 3,
            scheduled_p: T::from_f64(-row[2] / base),
            scheduled_q: T::from_f64(-row[3] / base),
        });
    }
    let mut branches = Vec::with_capacity(branch_rows.len());
    for (lineno, row) in branch_rows {
        if row.len() < 4 {
            return Err(Error::parse(
                lineno,
                format!("branch row needs at least 4 columns, found {}", row.len()),
            ));
        }
        branches.push(Branch {
            id: 0,
            from_bus: row[0] as usize,
            to_bus: row[1] as usize,
            resistance: T::from_f64(row[2]),
            reactance: T::from_f64(row[3]),
            is_split_edge: false,
        });
    }
    GridNetwork::new(buses, branches, T::from_f64(base))
}

fn parse_native<T: Scalar>(text: &str) -> Result<GridNetwork<T>> {
    #[derive(PartialEq)]
    enum Section {
        None,
        Buses,
        Branches,
    }
    let mut section = Section::None;
    let mut buses = Vec::new();
    let mut branches = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line {
            "[buses]" => {
                section = Section::Buses;
                continue;
            }
            "[branches]" => {
                section = Section::Branches;
                continue;
            }
            _ => {}
        }
        let row = numbers(line, lineno)?;
        match section {
            Section::Buses => {
                if row.len() != 4 {
                    return Err(Error::parse(
                        lineno,
                        format!("bus row needs 4 fields, found {}", row.len()),
                    ));
                }
                buses.push(Bus {
                    id: row[0] as usize,
                    is_substation: row[1] != 0.0,
                    scheduled_p: T::from_f64(row[2]),
                    scheduled_q: T::from_f64(row[3]),
                });
            }
            Section::Branches => {
                if row.len() != 5 {
                    return Err(Error::parse(
                        lineno,
                        format!("branch row needs 5 fields, found {}", row.len()),
                    ));
                }
                branches.push(Branch {
                    id: row[0] as usize,
                    from_bus: row[1] as usize,
                    to_bus: row[2] as usize,
                    resistance: T::from_f64(row[3]),
                    reactance: T::from_f64(row[4]),
                    is_split_edge: false,
                });
            }
            Section::None => {
                return Err(Error::parse(
                    lineno,
                    "data before any [buses]/[branches] section",
                ));
            }
        }
    }
    GridNetwork::new(buses, branches, T::one())
}
