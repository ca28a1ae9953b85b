//! Coefficient table in the layout of the published estimates.

use serde::{Deserialize, Serialize};

use super::estimate::GmmResult;
use super::params::{StructuralParams, PARAM_NAMES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub variable: String,
    pub parameter: String,
    pub estimate: f64,
    pub std_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSection {
    pub equation: String,
    pub rows: Vec<TableRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub sections: Vec<TableSection>,
    pub observations: usize,
    pub j_statistic: f64,
    pub df: usize,
    pub significance: f64,
}

const LAYOUT: [(&str, &[(&str, &str)]); 4] = [
    (
        "Switching Costs Equation",
        &[
            ("Intercept", "alpha1"),
            ("Dport*tfrac", "alpha2"),
            ("Voice Network Remoteness", "alpha3"),
            ("Data Network Remoteness", "alpha4"),
            ("Fraction International Data", "alpha5"),
        ],
    ),
    (
        "Pricing Equation",
        &[
            ("Intercept", "d"),
            ("Lagged share", "e"),
            ("Duration", "beta1"),
            ("Tport*tfrac", "beta6"),
            ("Tport", "beta5"),
            ("Voice Network Remoteness", "beta2"),
            ("Data Network Remoteness", "beta3"),
            ("Fraction International Data", "beta4"),
        ],
    ),
    ("Relocation Probability Equation", &[("M", "m")]),
    ("Exit Probability Equation", &[("R", "r")]),
];

/// Three significant digits, the precision of the published table.
pub fn fmt_sig3(x: f64) -> String {
    if x == 0.0 {
        return "0.00".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = (2 - exp).max(0) as usize;
    let s = format!("{:.*}", decimals, x);
    // Rounding can carry into a new digit, e.g. 0.09996 -> 0.1000.
    let exp2 = s.trim_start_matches('-').parse::<f64>().map_or(exp, |v| v.log10().floor() as i32);
    if exp2 > exp {
        format!("{:.*}", (2 - exp2).max(0) as usize, x)
    } else {
        s
    }
}

impl ResultsTable {
    pub fn new(
        params: &StructuralParams,
        std_errors: Option<&[f64]>,
        observations: usize,
        j_statistic: f64,
        df: usize,
        significance: f64,
    ) -> Self {
        let values = params.to_vec();
        let sections = LAYOUT
            .iter()
            .map(|(equation, rows)| TableSection {
                equation: equation.to_string(),
                rows: rows
                    .iter()
                    .map(|(variable, parameter)| {
                        let k = PARAM_NAMES.iter().position(|n| n == parameter).expect("known parameter");
                        TableRow {
                            variable: variable.to_string(),
                            parameter: parameter.to_string(),
                            estimate: values[k],
                            std_error: std_errors.map(|s| s[k]),
                        }
                    })
                    .collect(),
            })
            .collect();
        ResultsTable {
            sections,
            observations,
            j_statistic,
            df,
            significance,
        }
    }

    pub fn from_result(r: &GmmResult) -> Self {
        let se: Option<Vec<f64>> = r.estimates.iter().map(|e| e.std_error).collect();
        ResultsTable::new(&r.params, se.as_deref(), r.observations, r.j_statistic, r.df, r.p_value)
    }

    pub fn render(&self) -> String {
        let mut out = String::from("Independent Variable\tEstimate\n");
        for s in &self.sections {
            out.push_str(&s.equation);
            out.push('\n');
            for row in &s.rows {
                let se = row.std_error.map_or("(n/a)".to_string(), |v| format!("({})", fmt_sig3(v)));
                out.push_str(&format!("{}\t{} {}\n", row.variable, fmt_sig3(row.estimate), se));
            }
        }
        out.push_str(&format!("Observations\t{}\n", self.observations));
        out.push_str(&format!(
            "J Statistic (significance level)\t{} ({:.2})\n",
            fmt_sig3(self.j_statistic),
            self.significance
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_significant_digits() {
        assert_eq!(fmt_sig3(0.808), "0.808");
        assert_eq!(fmt_sig3(0.0177), "0.0177");
        assert_eq!(fmt_sig3(-0.646), "-0.646");
        assert_eq!(fmt_sig3(401.0), "401");
        assert_eq!(fmt_sig3(26.7), "26.7");
        assert_eq!(fmt_sig3(-4.30), "-4.30");
        assert_eq!(fmt_sig3(0.0), "0.00");
        assert_eq!(fmt_sig3(0.09996), "0.100");
    }

    #[test]
    fn reported_base_model_renders_in_published_layout() {
        let p = StructuralParams::reported_base_model();
        let se = [
            0.0177, 0.0263, 0.0350, 0.0269, 0.055, 0.0429, 1.12, 0.467, 5.47, 0.0404, 0.0269, 0.0, 0.0825, 0.279,
            0.00491,
        ];
        let t = ResultsTable::new(&p, Some(&se), 187, 26.7, 21, 0.18);
        let text = t.render();
        assert!(text.contains("Intercept\t0.808 (0.0177)"));
        assert!(text.contains("Lagged share\t0.347 (0.00491)"));
        assert!(text.contains("Tport*tfrac\t0.564 (0.0269)"));
        assert!(text.contains("Tport\t-0.187 (0.0404)"));
        assert!(text.contains("M\t401 (0.00)"));
        assert!(text.contains("R\t-3.89 (0.0825)"));
        assert!(text.contains("Observations\t187"));
        assert!(text.contains("J Statistic (significance level)\t26.7 (0.18)"));
        let rows: usize = t.sections.iter().map(|s| s.rows.len()).sum();
        assert_eq!(rows, PARAM_NAMES.len());
    }
}
