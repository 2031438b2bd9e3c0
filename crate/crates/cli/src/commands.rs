use std::fmt::Display;
use std::fs;
use std::path::Path;

use mrdprice::distributions::spec::from_value;
use mrdprice::equilibrium::{optimal_price_with, profit_curve, scan_bounds, EquilibriumError, SolverSettings};
use mrdprice::market::{no_trade_probability, realized_profits, MarketError, MarketKind, MarketOutcome, MarketStructure};
use mrdprice::numerics::{GridSpec, DEFAULT_GRID_POINTS, DEFAULT_ROOT_TOL};
use mrdprice::orders::{
    check_order_with, demand_grid, scenario_from_value, statics_suite, OrderKind, StaticsRow, GUARD_SIGMAS, ORDER_TOL,
    PRICE_TOL,
};
use mrdprice::sim::{mc_two_stage, PricePolicy, SimConfig, SimError, IDENTITY_TOL};
use mrdprice::DemandDistribution;
use serde_json::{json, Value};

use crate::figures;
use crate::manifest::Manifest;
use crate::{Common, Failure};

pub const DEFAULT_PERFORMANCE_LAW: &str = r#"{"family": "gamma", "params": {"shape": 2, "scale": 2}}"#;

fn input<E: Display>(e: E) -> Failure {
    Failure::Input(e.to_string())
}

fn equilibrium_failure(e: EquilibriumError) -> Failure {
    match e {
        EquilibriumError::NoFiniteOptimum { .. } => Failure::NoOptimum(e.to_string()),
        other => input(other),
    }
}

fn market_failure(e: MarketError) -> Failure {
    match e {
        MarketError::Equilibrium(e) => equilibrium_failure(e),
        other => input(other),
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

/// Marks every normal law in a spec as untruncated.
fn untruncate(v: &mut Value) {
    match v {
        Value::Object(obj) => {
            if obj.get("family").and_then(Value::as_str) == Some("normal") {
                match obj.get_mut("params") {
                    Some(Value::Object(p)) => {
                        p.insert("truncated".into(), Value::Bool(false));
                    }
                    _ => {
                        obj.insert("truncated".into(), Value::Bool(false));
                    }
                }
            }
            obj.values_mut().for_each(untruncate);
        }
        Value::Array(a) => a.iter_mut().for_each(untruncate),
        _ => {}
    }
}

fn parse_json(c: &Common, bytes: &[u8]) -> Result<Value, Failure> {
    let mut v: Value = serde_json::from_slice(bytes).map_err(|e| Failure::Input(format!("malformed JSON: {e}")))?;
    if c.untruncated_normal {
        eprintln!("mrdprice: warning: normal laws are untruncated; demand can be negative");
        untruncate(&mut v);
    }
    Ok(v)
}

fn load_law(c: &Common, m: &mut Manifest, label: &str, path: &Path) -> Result<DemandDistribution, Failure> {
    let bytes = read(path)?;
    m.input(label, &bytes);
    from_value(&parse_json(c, &bytes)?).map_err(input)
}

fn print_json(m: &Manifest, v: &Value) {
    println!("{}", serde_json::to_string_pretty(&m.wrap(v)).unwrap_or_default());
}

fn io_failure(e: std::io::Error) -> Failure {
    Failure::Input(format!("writing outputs: {e}"))
}

pub fn parse_list(s: &str) -> Result<Vec<usize>, Failure> {
    s.split(',')
        .map(|t| match t.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Failure::Input(format!("`{t}` is not a positive integer"))),
        })
        .collect()
}

/// `LO:HI:STEPS`, with STEPS the number of points.
pub fn parse_range(s: &str) -> Result<Vec<f64>, Failure> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Failure::Input(format!("`{s}` is not LO:HI:STEPS"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let steps: usize = parts[2].trim().parse().map_err(|_| bad())?;
    GridSpec::linear(lo, hi, steps).build().map_err(input)
}

fn solver_settings(c: &Common) -> SolverSettings {
    let points = c.grid_points.unwrap_or(DEFAULT_GRID_POINTS);
    SolverSettings { root_tol: c.abs_tol.unwrap_or(DEFAULT_ROOT_TOL), seed_points: points, grid_points: points }
}

pub fn solve(c: &Common, path: &Path) -> Result<(), Failure> {
    let mut m = Manifest::new("solve");
    let d = load_law(c, &mut m, "dist", path)?;
    let settings = solver_settings(c);
    m.tol("root_tol", settings.root_tol);
    m.tol("grid_points", settings.grid_points as f64);
    let eq = optimal_price_with(&d, &settings).map_err(equilibrium_failure)?;
    if eq.flat_optimum {
        eprintln!(
            "mrdprice: the expected profit is constant on {:?}; every price there is optimal",
            eq.plateaus.iter().map(|p| (p.start, p.end)).collect::<Vec<_>>()
        );
    }
    for w in &eq.warnings {
        eprintln!("mrdprice: warning: {w}");
    }
    let out = json!({
        "distribution": d.describe(),
        "r_star": eq.price(),
        "equilibrium": eq,
        "classification": eq.classification,
    });
    print_json(&m, &out);
    if let Some(dir) = &c.out {
        let (lo, hi) = scan_bounds(&d);
        let grid = GridSpec::linear(lo, hi, settings.grid_points).build().map_err(input)?;
        let curve = profit_curve(&d, 1.0, &grid);
        let mut body = String::from("r,profit,mrd,gmrd\n");
        for &(r, p) in &curve.samples {
            body.push_str(&format!("{r:.12e},{p:.12e},{:.12e},{:.12e}\n", d.mrd(r), d.mrd(r) / r));
        }
        m.write_csv(dir, "profit_curve.csv", &body).map_err(io_failure)?;
        m.write_json(dir, "solve.json", &out).map_err(io_failure)?;
    }
    Ok(())
}

fn order_grid(order: OrderKind, d1: &DemandDistribution, d2: &DemandDistribution, points: usize) -> Result<Vec<f64>, Failure> {
    let mut g = if matches!(order, OrderKind::Disp | OrderKind::Ew) {
        GridSpec::linear(1e-6, 1.0 - 1e-6, points).build().map_err(input)?
    } else {
        let base = demand_grid(d1, d2, order == OrderKind::Hr).map_err(input)?;
        let hi = base[base.len() - 1];
        let lo = base.iter().copied().find(|&x| x > 0.0).unwrap_or(hi * 1e-9);
        let mut g = GridSpec::linear(0.0, hi, points).build().map_err(input)?;
        if lo < hi {
            g.extend(GridSpec::geometric(lo, hi, points).build().map_err(input)?);
        }
        g
    };
    g.sort_by(f64::total_cmp);
    g.dedup();
    Ok(g)
}

pub fn orders(c: &Common, p1: &Path, p2: &Path, name: &str) -> Result<(), Failure> {
    let mut m = Manifest::new("orders");
    let order: OrderKind = name.parse().map_err(input)?;
    let d1 = load_law(c, &mut m, "dist", p1)?;
    let d2 = load_law(c, &mut m, "dist2", p2)?;
    let tol = c.abs_tol.unwrap_or(ORDER_TOL);
    m.tol("order_tol", tol);
    let grid = c.grid_points.map(|n| order_grid(order, &d1, &d2, n)).transpose()?;
    let v = check_order_with(order, &d1, &d2, grid.as_deref(), tol).map_err(input)?;
    let out = json!({ "first": d1.describe(), "second": d2.describe(), "verdict": v });
    print_json(&m, &out);
    if let Some(dir) = &c.out {
        m.write_json(dir, "orders.json", &out).map_err(io_failure)?;
        figures::write_comparison(&m, dir, &d1, &d2, c.grid_points.unwrap_or(DEFAULT_GRID_POINTS), c.gnuplot)
            .map_err(io_failure)?;
    }
    if v.holds_1_le_2 || v.holds_2_le_1 {
        Ok(())
    } else {
        Err(Failure::OrderFails(format!("{} does not hold in either direction; crossings at {:?}", order.name(), v.crossings)))
    }
}

fn table_line(row: &StaticsRow) -> String {
    let mut s = format!("{} | {} | {} | {}: {}", row.theorem, row.transformation, row.hypothesis, row.price_relation, row.status);
    for p in &row.prices {
        let prices: Vec<String> = p.prices.iter().map(|r| format!("{r:.9}")).collect();
        s.push_str(&format!("\n    r*[{}] = {}", p.label, if prices.is_empty() { "none".into() } else { prices.join(", ") }));
        if p.stderr > 0.0 {
            s.push_str(&format!(" (stderr {:.2e})", p.stderr));
        }
    }
    for pr in row.premises.iter().filter(|p| !p.holds) {
        s.push_str(&format!("\n    premise fails: {}", pr.name));
    }
    for n in &row.notes {
        s.push_str(&format!("\n    note: {n}"));
    }
    s
}

pub fn statics(c: &Common, path: &Path, as_json: bool) -> Result<(), Failure> {
    let mut m = Manifest::new("statics");
    let bytes = read(path)?;
    m.input("scenario", &bytes);
    m.tol("price_tol", PRICE_TOL);
    m.tol("guard_sigmas", GUARD_SIGMAS);
    let v = parse_json(c, &bytes)?;
    let items = match v {
        Value::Array(a) => a,
        other => vec![other],
    };
    let mut rows = Vec::with_capacity(items.len());
    for item in &items {
        let scenario = scenario_from_value(item).map_err(input)?;
        rows.push(statics_suite(&scenario).map_err(input)?);
    }
    let out = serde_json::to_value(&rows).map_err(input)?;
    if as_json {
        print_json(&m, &out);
    } else {
        for row in &rows {
            println!("{}", table_line(row));
        }
    }
    if let Some(dir) = &c.out {
        m.write_json(dir, "statics.json", &out).map_err(io_failure)?;
    }
    Ok(())
}

pub fn performance(c: &Common, dist: Option<&Path>, n: &str, alpha_grid: Option<&str>) -> Result<(), Failure> {
    let mut m = Manifest::new("performance");
    let d = match dist {
        Some(p) => load_law(c, &mut m, "dist", p)?,
        None => {
            m.input("dist", DEFAULT_PERFORMANCE_LAW.as_bytes());
            from_value(&parse_json(c, DEFAULT_PERFORMANCE_LAW.as_bytes())?).map_err(input)?
        }
    };
    let ns = parse_list(n)?;
    let settings = solver_settings(c);
    m.tol("root_tol", settings.root_tol);
    let eq = optimal_price_with(&d, &settings).map_err(equilibrium_failure)?;
    let r_star = eq.price().ok_or_else(|| Failure::Input(format!("optimal price is not unique: {:?}", eq.prices)))?;
    let alphas = match alpha_grid {
        Some(s) => parse_range(s)?,
        None => GridSpec::linear(0.0, 12.0 * r_star, 601).build().map_err(input)?,
    };
    let no_trade = no_trade_probability(&d).map_err(market_failure)?;

    let mut body = format!("{}\n", MarketOutcome::CSV_HEADER);
    for &n in &ns {
        for &a in &alphas {
            body.push_str(&realized_profits(a, r_star, n).csv_row());
            body.push('\n');
        }
    }
    let per_n: Vec<Value> = ns
        .iter()
        .map(|&n| {
            json!({
                "n": n,
                "ratio": mrdprice::market::ratio_analytics(r_star, n),
                "support": mrdprice::market::support_check(&d, r_star, n),
            })
        })
        .collect();
    let out = json!({ "distribution": d.describe(), "r_star": r_star, "no_trade": no_trade, "markets": per_n });
    print_json(&m, &out);

    let dir = c.out.clone().unwrap_or_else(|| ".".into());
    m.write_csv(&dir, "performance.csv", &body).map_err(io_failure)?;
    m.write_json(&dir, "performance.json", &out).map_err(io_failure)?;
    m.write_csv(&dir, "figure4_notrade.csv", &figures::no_trade_sweeps().map_err(market_failure)?).map_err(io_failure)?;
    let (curves, markers) = figures::ratio_curves(r_star, &ns, &alphas);
    m.write_csv(&dir, "figure5_ratio.csv", &curves).map_err(io_failure)?;
    m.write_csv(&dir, "figure5_markers.csv", &markers).map_err(io_failure)?;
    if c.gnuplot {
        fs::write(dir.join("figures.gp"), figures::PERFORMANCE_SCRIPT).map_err(io_failure)?;
    }
    Ok(())
}

pub struct SimArgs<'a> {
    pub dist: &'a Path,
    pub config: Option<&'a Path>,
    pub structure: &'a str,
    pub n: &'a str,
    pub beta: f64,
    pub gamma: f64,
    pub policy: &'a str,
    pub price_grid: Option<&'a str>,
}

fn sim_failure(e: SimError) -> Failure {
    match e {
        SimError::Equilibrium(e) => equilibrium_failure(e),
        other => input(other),
    }
}

pub fn simulate(c: &Common, a: &SimArgs) -> Result<(), Failure> {
    let mut m = Manifest::new("simulate");
    let d = load_law(c, &mut m, "dist", a.dist)?;
    let policy = match a.policy {
        "optimal_stochastic" => PricePolicy::OptimalStochastic,
        "oracle_deterministic" => PricePolicy::OracleDeterministic,
        p => return Err(Failure::Input(format!("unknown policy `{p}`"))),
    };
    let config = match a.config {
        Some(p) => {
            let bytes = read(p)?;
            m.input("config", &bytes);
            let cfg: SimConfig = serde_json::from_slice(&bytes).map_err(|e| Failure::Input(format!("config: {e}")))?;
            cfg.validate().map_err(sim_failure)?;
            cfg
        }
        None => {
            let ns = parse_list(a.n)?;
            let [n] = ns[..] else {
                return Err(Failure::Input("simulate takes a single --n".into()));
            };
            let kind: MarketKind = a.structure.parse().map_err(input)?;
            let structure = MarketStructure::new(kind, a.beta, a.gamma, n, c.allow_beta_le_gamma).map_err(input)?;
            let grid = match a.price_grid {
                Some(s) => parse_range(s)?,
                None => {
                    let eq = optimal_price_with(&d, &solver_settings(c)).map_err(equilibrium_failure)?;
                    let centre = eq.price().unwrap_or(0.5 * d.mean());
                    GridSpec::linear(0.5 * centre, 1.5 * centre, 21).build().map_err(input)?
                }
            };
            SimConfig::new(c.seed, c.draws, structure, grid).map_err(sim_failure)?
        }
    };
    m.seed = Some(config.seed);
    m.tol("draws", config.n_draws as f64);
    m.tol("identity_tol", IDENTITY_TOL);
    let report = mc_two_stage(&d, policy, &config).map_err(sim_failure)?;
    let summary = json!({
        "distribution": d.describe(),
        "structure": report.structure,
        "policy": report.policy,
        "r_star": report.r_star,
        "empirical_argmax": report.empirical_argmax,
        "no_trade": report.no_trade,
        "supplier_profit": report.supplier_profit,
        "retailer_profit": report.retailer_profit,
        "aggregate_profit": report.aggregate_profit,
        "identity_max_deviation": report.identity_max_deviation,
    });
    print_json(&m, &summary);
    let dir = c.out.clone().unwrap_or_else(|| ".".into());
    m.write_json(&dir, "simulate.json", &serde_json::to_value(&report).map_err(input)?).map_err(io_failure)?;
    m.write_csv(&dir, "sim_curve.csv", &report.curve_csv()).map_err(io_failure)?;
    m.write_csv(&dir, "sim_playout.csv", &report.playout_csv()).map_err(io_failure)?;
    Ok(())
}

pub fn notrade(c: &Common, path: &Path) -> Result<(), Failure> {
    let mut m = Manifest::new("notrade");
    let d = load_law(c, &mut m, "dist", path)?;
    m.tol("representation_tol", mrdprice::market::REPRESENTATION_TOL);
    let report = no_trade_probability(&d).map_err(market_failure)?;
    let out = json!({ "distribution": d.describe(), "report": report });
    print_json(&m, &out);
    if let Some(dir) = &c.out {
        m.write_json(dir, "notrade.json", &out).map_err(io_failure)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_lists_and_ranges() {
        assert_eq!(parse_list("2, 5,8").unwrap(), vec![2, 5, 8]);
        assert!(parse_list("0").is_err());
        let g = parse_range("0:10:11").unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(g[10], 10.0);
        assert!(parse_range("1:2").is_err());
    }

    #[test]
    fn untruncates_nested_normals() {
        let mut v: Value = serde_json::from_str(
            r#"{"transform": "scale", "c": 2, "of": {"family": "normal", "params": {"mu": 1, "sigma": 0.1}}}"#,
        )
        .unwrap();
        untruncate(&mut v);
        assert_eq!(v["of"]["params"]["truncated"], Value::Bool(false));
    }
}
