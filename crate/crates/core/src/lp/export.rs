//! CPLEX-LP text export, for cross-checking against external solvers.

use std::fmt::Write as _;
use std::io::{self, Write};

use super::{LpProblem, Tag};

fn name(tag: &Tag) -> String {
    let mut s = tag.family.replace(|c: char| !c.is_ascii_alphanumeric() && c != '_', "_");
    for i in &tag.index {
        let _ = write!(s, "_{i}");
    }
    s
}

/// 17 significant digits, always with an explicit sign.
fn num(v: f64) -> String {
    let s = format!("{:.16e}", v.abs());
    if v < 0.0 {
        format!("- {s}")
    } else {
        format!("+ {s}")
    }
}

fn linear(out: &mut String, coeffs: &[(usize, f64)], names: &[String]) {
    if coeffs.is_empty() {
        out.push_str(" 0 ");
        out.push_str(&names.first().cloned().unwrap_or_default());
    }
    for &(j, a) in coeffs {
        let _ = write!(out, " {} {}", num(a), names[j]);
    }
}

pub fn write_lp_format<W: Write>(problem: &LpProblem, mut w: W) -> io::Result<()> {
    let names: Vec<String> = problem.var_tags.iter().map(name).collect();
    let mut out = String::new();
    out.push_str("\\ generated by mcb-tsa\nMinimize\n obj:");
    let obj: Vec<(usize, f64)> =
        problem.objective.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(j, c)| (j, *c)).collect();
    linear(&mut out, &obj, &names);
    if problem.offset != 0.0 {
        let _ = write!(out, " {}", num(problem.offset));
    }
    out.push_str("\nSubject To\n");
    for row in &problem.eq_rows {
        let _ = write!(out, " {}:", name(&row.tag));
        linear(&mut out, &row.coeffs, &names);
        let _ = writeln!(out, " = {:.16e}", row.rhs);
    }
    for row in &problem.ub_rows {
        let _ = write!(out, " {}:", name(&row.tag));
        linear(&mut out, &row.coeffs, &names);
        let _ = writeln!(out, " <= {:.16e}", row.rhs);
    }
    out.push_str("Bounds\n");
    for (j, nm) in names.iter().enumerate() {
        let (l, u) = (problem.lower[j], problem.upper[j]);
        match (l.is_finite(), u.is_finite()) {
            (true, true) if l == u => {
                let _ = writeln!(out, " {nm} = {l:.16e}");
            }
            (true, true) => {
                let _ = writeln!(out, " {l:.16e} <= {nm} <= {u:.16e}");
            }
            (true, false) => {
                let _ = writeln!(out, " {nm} >= {l:.16e}");
            }
            (false, true) => {
                let _ = writeln!(out, " -inf <= {nm} <= {u:.16e}");
            }
            (false, false) => {
                let _ = writeln!(out, " {nm} free");
            }
        }
    }
    out.push_str("End\n");
    w.write_all(out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn export_names_rows_by_tag() {
        let mut p = LpProblem::new();
        let x = p.add_var(Tag::new("x", &[0]), 130.0, 0.0, f64::INFINITY);
        p.add_eq(Tag::new("BALANCE", &[3]), vec![(x, 1.0)], 0.1);
        let mut buf = Vec::new();
        write_lp_format(&p, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.contains("BALANCE_3: + 1.0000000000000000e0 x_0 = 1.0000000000000001e-1"));
        assert!(s.contains("x_0 >= 0.0000000000000000e0"));
    }
}
