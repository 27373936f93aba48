//! Closed-form expectations evaluated from `key=value` parameters.
//!
//! Output is itself key-value text: a `formula` line naming the expression
//! and one line per computed quantity.

use std::path::PathBuf;

use anchormi::analysis::{anchored_variance, information_loss_fraction};
use anchormi::kv::{join, KvDoc};
use anchormi::oracle::{
    delta_q_term, expected_between_variance, intro_information_curve, prop1_exact_variance, prop1_full_variance,
    reference_observed_gap, remainder_bound_scale, stochastic_delta_gap, stochastic_delta_gap_by_visit,
    theorem1_gap, BetweenPattern, DeviationGroup, DeviationScheme, GapPattern,
};
use anchormi::Error;
use nalgebra::{DMatrix, DVector};

use crate::error::{CliError, CliResult};

#[derive(Debug, clap::Args)]
pub struct OracleArgs {
    /// Formula name; `list` prints them all.
    pub formula: String,
    /// Parameters as `key=value`; these override `--params`.
    #[arg(allow_hyphen_values = true)]
    pub params: Vec<String>,
    /// Key-value parameter file.
    #[arg(long = "params")]
    pub params_file: Option<PathBuf>,
}

pub struct Formula {
    pub name: &'static str,
    pub description: &'static str,
    eval: fn(&KvDoc) -> anchormi::Result<Vec<(String, String)>>,
}

pub const FORMULAS: &[Formula] = &[
    Formula {
        name: "intro_information",
        description: "information n^2 / ((n - nd) s2 + nd sm2) when nd deviators have variance sm2",
        eval: intro,
    },
    Formula {
        name: "prop1",
        description: "expected full-data variance of the controlled estimator, pairwise spread over deviation groups",
        eval: prop1,
    },
    Formula {
        name: "prop1_exact",
        description: "exact expectation of s_r^2/n + s_a^2/n with the active arm a mixture of deviation groups",
        eval: prop1_exact,
    },
    Formula {
        name: "delta_q",
        description: "excess Q of the delta-adjusted full-data variance over the MAR one",
        eval: delta_q,
    },
    Formula {
        name: "between_variance",
        description: "expected between-imputation variance, sum of pi^2 (s2 + n_d P' V P) / n_d over patterns",
        eval: between,
    },
    Formula {
        name: "gap",
        description: "anchoring gap, sum of pi^2 P' (V_primary - V_sensitivity) P over patterns",
        eval: gap,
    },
    Formula {
        name: "reference_gap",
        description: "gap for reference-arm deviators, sum of pi^2 P' S P scaled by pi_d / (n (1 - pi_d))",
        eval: reference_gap,
    },
    Formula {
        name: "stochastic_delta_gap",
        description: "gap of a stochastic delta, -(pi_d sd)^2, or -(sum pi_j (J + 1 - j))^2 sd^2 by visit",
        eval: stochastic_delta,
    },
    Formula {
        name: "remainder_bound",
        description: "magnitude E[B] / E[W] / n^2 of the neglected remainder (unit constant)",
        eval: remainder,
    },
    Formula {
        name: "information_loss",
        description: "share of information lost, (1/se_ref^2 - 1/se_cmp^2) * se_ref^2",
        eval: info_loss,
    },
    Formula {
        name: "anchored_variance",
        description: "information-anchored variance vpo / vpf * vsf",
        eval: anchored,
    },
];

fn out(value: f64) -> Vec<(String, String)> {
    vec![("value".into(), value.to_string())]
}

fn intro(p: &KvDoc) -> anchormi::Result<Vec<(String, String)>> {
    p.reject_unknown(&["n", "nd", "s2", "sm2"])?;
    let grid: Vec<f64> = p.list("sm2")?.ok_or_else(|| Error::Config("missing key `sm2`".into()))?;
    let curve = intro_information_curve(p.require_value("n")?, p.require_value("nd")?, p.require_value("s2")?, &grid);
    let values: Vec<f64> = curve.iter().map(|c| c.1).collect();
    Ok(vec![("sm2".into(), join(&grid)), ("value".into(), join(&values))])
}

/// `deviators = visit:count:final_mean, ...`
fn scheme(p: &KvDoc) -> anchormi::Result<DeviationScheme> {
    let groups = p
        .list::<String>("deviators")?
        .unwrap_or_default()
        .iter()
        .map(|g| {
            let parts: Vec<&str> = g.split(':').collect();
            let bad = || Error::Config(format!("deviator group `{g}` is not visit:count:mean"));
            match parts.as_slice() {
                [v, c, m] => Ok(DeviationGroup {
                    visit: v.trim().parse().map_err(|_| bad())?,
                    count: c.trim().parse().map_err(|_| bad())?,
                    final_mean: m.trim().parse().map_err(|_| bad())?,
                }),
                _ => Err(bad()),
            }
        })
        .collect::<anchormi::Result<Vec<_>>>()?;
    Ok(DeviationScheme {
        n: p.require_value("n")?,
        n_visits: p.parse_value("visits")?.unwrap_or(3),
        groups,
        active_final_mean: p.require_value("mu_a")?,
        final_variance: p.require_value("s2")?,
        adjusted_variance: p.parse_value("s2_adj")?,
    })
}

const SCHEME_KEYS: &[&str] = &["n", "visits", "deviators", "mu_a", "s2", "s2_adj", "adjusted"];

fn prop1(p: &KvDoc) -> anchormi::Result<Vec<(String, String)>> {
    p.reject_unknown(SCHEME_KEYS)?;
    let adjusted = p.parse_value("adjusted")?.unwrap_or(false);
    Ok(out(prop1_full_variance(&scheme(p)?, adjusted)?))
}

fn prop1_exact(p: &KvDoc) -> anchormi::Result<Vec<(String, String)>> {
    p.reject_unknown(&SCHEME_KEYS[..5])?;
    Ok(out(prop1_exact_variance(&scheme(p)?)?))
}

fn pairs<A: std::str::FromStr, B: std::str::FromStr>(p: &KvDoc, key: &str) -> anchormi::Result<Vec<(A, B)>> {
    p.list::<String>(key)?
        .ok_or_else(|| Error::Config(format!("missing key `{key}`")))?
        .iter()
        .map(|s| {
            let bad = || Error::Config(format!("`{key}` entry `{s}` is not a:b"));
            let (a, b) = s.split_once(':').ok_or_else(bad)?;
            Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
        })
        .collect()
}

fn delta_q(p: &KvDoc) -> anchormi::Result<Vec<(String, String)>> {
    p.reject_unknown(&["n", "visits", "deviators", "delta"])?;
    let n: usize = p.require_value("n")?;
    let groups: Vec<(usize, usize)> = pairs(p, "deviators")?;
    let n_d: usize = groups.iter().map(|g| g.1).sum();
    if n_d > n {
        return Err(Error::Config(format!("{n_d} deviators exceed n = {n}")));
    }
    let q = delta_q_term(n, n - n_d, &groups, p.require_value("delta")?, p.parse_value("visits")?.unwrap_or(3));
    Ok(out(q))
}

fn names(p: &KvDoc) -> anchormi::Result<Vec<String>> {
    p.list("patterns")?.ok_or_else(|| Error::Config("missing key `patterns`".into()))
}

fn allowed(fixed: &[&str], names: &[String]) -> Vec<String> {
    fixed.iter().map(|s| s.to_string()).chain(names.iter().map(|n| format!("{n}.*"))).collect()
}

fn check_keys(p: &KvDoc, fixed: &[&str], names: &[String]) -> anchormi::Result<()> {
    let keys = allowed(fixed, names);
    p.reject_unknown(&keys.iter().map(String::as_str).collect::<Vec<_>>())
}

fn vector(p: &KvDoc, key: &str) -> anchormi::Result<DVector<f64>> {
    let v: Vec<f64> = p.list(key)?.ok_or_else(|| Error::Config(format!("missing key `{key}`")))?;
    Ok(DVector::from_vec(v))
}

fn matrix(p: &KvDoc, key: &str) -> anchormi::Result<DMatrix<f64>> {
    let rows = p.matrix(key)?.ok_or_else(|| Error::Config(format!("missing key `{key}`")))?;
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != c) {
        return Err(Error::Config(format!("`{key}` has ragged rows")));
    }
    Ok(DMatrix::from_fn(rows.len(), c, |i, j| rows[i][j]))
}

fn between(p: &KvDoc) -> anchormi::Result<Vec<(String, String)>> {
    let names = names(p)?;
    check_keys(p, &["patterns"], &names)?;
    let patterns = names
        .iter()
        .map(|n| {
            Ok(BetweenPattern {
                share: p.require_value(&format!("{n}.share"))?,
                residual_variance: p.require_value(&format!("{n}.residual_variance"))?,
                count: p.require_value(&format!("{n}.count"))?,
                mean_predictor: vector(p, &format!("{n}.predictor"))?,
                coef_cov: matrix(p, &format!("{n}.coef_cov"))?,
            })
        })
        .collect::<anchormi::Result<Vec<_>>>()?;
    Ok(out(expected_between_variance(&patterns)?))
}

fn gap(p: &KvDoc) -> anchormi::Result<Vec<(String, String)>> {
    let names = names(p)?;
    check_keys(p, &["patterns"], &names)?;
    let patterns = names
        .iter()
        .map(|n| {
            Ok(GapPattern {
                share: p.require_value(&format!("{n}.share"))?,
                mean_predictor: vector(p, &format!("{n}.predictor"))?,
                coef_cov_primary: matrix(p, &format!("{n}.cov_primary"))?,
                coef_cov_sensitivity: matrix(p, &format!("{n}.cov_sensitivity"))?,
            })
        })
        .collect::<anchormi::Result<Vec<_>>>()?;
    Ok(out(theorem1_gap(&patterns)?))
}

fn reference_gap(p: &KvDoc) -> anchormi::Result<Vec<(String, String)>> {
    let names = names(p)?;
    check_keys(p, &["patterns", "n", "pi_d"], &names)?;
    let patterns = names
        .iter()
        .map(|n| {
            Ok((
                p.require_value(&format!("{n}.share"))?,
                vector(p, &format!("{n}.predictor"))?,
                matrix(p, &format!("{n}.cov"))?,
            ))
        })
        .collect::<anchormi::Result<Vec<_>>>()?;
    Ok(out(reference_observed_gap(&patterns, p.require_value("n")?, p.require_value("pi_d")?)?))
}

fn stochastic_delta(p: &KvDoc) -> anchormi::Result<Vec<(String, String)>> {
    p.reject_unknown(&["pi_d", "sd", "shares", "visits"])?;
    let sd: f64 = p.require_value("sd")?;
    let value = match p.get("shares") {
        Some(_) => stochastic_delta_gap_by_visit(&pairs(p, "shares")?, p.parse_value("visits")?.unwrap_or(3), sd),
        None => stochastic_delta_gap(p.require_value("pi_d")?, sd),
    };
    Ok(out(value))
}

fn remainder(p: &KvDoc) -> anchormi::Result<Vec<(String, String)>> {
    p.reject_unknown(&["eb", "ew", "n"])?;
    Ok(out(remainder_bound_scale(p.require_value("eb")?, p.require_value("ew")?, p.require_value("n")?)))
}

fn info_loss(p: &KvDoc) -> anchormi::Result<Vec<(String, String)>> {
    p.reject_unknown(&["se_ref", "se_cmp"])?;
    Ok(out(information_loss_fraction(p.require_value("se_ref")?, p.require_value("se_cmp")?)?))
}

fn anchored(p: &KvDoc) -> anchormi::Result<Vec<(String, String)>> {
    p.reject_unknown(&["vpo", "vpf", "vsf"])?;
    Ok(out(anchored_variance(p.require_value("vpo")?, p.require_value("vpf")?, p.require_value("vsf")?)?))
}

/// Merge the parameter file with command-line pairs, the latter winning.
pub fn parameters(args: &OracleArgs) -> CliResult<KvDoc> {
    let mut doc = match &args.params_file {
        Some(path) => KvDoc::parse(&std::fs::read_to_string(path)?)?,
        None => KvDoc::new(),
    };
    for kv in &args.params {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("parameter `{kv}` is not key=value")))?;
        let line = KvDoc::parse(&format!("{}={}", k.trim(), v))?;
        doc.set(k.trim(), line.get(k.trim()).unwrap_or(""));
    }
    Ok(doc)
}

/// Evaluate a formula; the rendered output is key-value text.
pub fn evaluate(name: &str, params: &KvDoc) -> CliResult<String> {
    let formula = FORMULAS
        .iter()
        .find(|f| f.name == name)
        .ok_or_else(|| CliError::UnknownFormula(name.to_string()))?;
    let mut doc = KvDoc::new();
    doc.set("formula", format!("{} ({})", formula.name, formula.description));
    for (k, v) in (formula.eval)(params)? {
        doc.set(&k, v);
    }
    Ok(doc.render())
}

pub fn run(args: &OracleArgs) -> CliResult<()> {
    if args.formula == "list" {
        let text: String = FORMULAS.iter().map(|f| format!("{:<22} {}\n", f.name, f.description)).collect();
        return crate::emit(&text);
    }
    let params = parameters(args)?;
    crate::emit(&evaluate(&args.formula, &params)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(name: &str, text: &str) -> CliResult<String> {
        evaluate(name, &KvDoc::parse(text).unwrap())
    }

    fn value(rendered: &str) -> f64 {
        KvDoc::parse(rendered).unwrap().require_value("value").unwrap()
    }

    #[test]
    fn intro_threshold() {
        let r = eval("intro_information", "n=100\nnd=20\ns2=1\nsm2=2.25").unwrap();
        assert_eq!(value(&r), 80.0);
        assert!(r.starts_with("formula = intro_information"));
    }

    #[test]
    fn prop1_without_deviators_is_two_s2_over_n() {
        let r = eval("prop1", "n=20\nmu_a=2.2\ns2=0.6").unwrap();
        assert!((value(&r) - 2.0 * 0.6 / 20.0).abs() < 1e-15);
    }

    #[test]
    fn stochastic_delta_sign() {
        let r = eval("stochastic_delta_gap", "pi_d=0.3\nsd=0.46").unwrap();
        assert!((value(&r) + 0.019044).abs() < 1e-12);
    }

    #[test]
    fn loss_fraction_display_arithmetic() {
        let r = eval("information_loss", "se_ref=0.072\nse_cmp=0.132").unwrap();
        assert!((value(&r) - 0.70).abs() < 0.005);
    }

    #[test]
    fn unknown_formula_and_key() {
        assert!(matches!(eval("nope", ""), Err(CliError::UnknownFormula(_))));
        assert!(matches!(eval("remainder_bound", "eb=1\new=1\nn=2\nx=1"), Err(CliError::Core(Error::Config(_)))));
    }

    #[test]
    fn between_from_named_patterns() {
        let text = "patterns = a\na.share = 0.3\na.residual_variance = 0.5\na.count = 30\n\
                    a.predictor = 1, 2\na.coef_cov = 0.01, 0; 0, 0.02";
        let expected = 0.09 * (0.5 + 30.0 * (0.01 + 4.0 * 0.02)) / 30.0;
        assert!((value(&eval("between_variance", text).unwrap()) - expected).abs() < 1e-15);
    }
}
