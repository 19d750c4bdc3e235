use std::path::Path;

use anyhow::{anyhow, bail, Context as _, Result};
use ctdd::excitation::{check_pe, PeCertificate};
use ctdd::fundamental::{
    build_dictionary, dd_simulate, identify, DataDictionary, DictionaryKind, DictionaryOptions,
};
use ctdd::legendre::{fit_series, gauss_legendre, project_fn, QuadratureRule};
use ctdd::lqr::{
    solve_dd_lqr_io, solve_dd_lqr_state, solve_reference_analytic_example, solve_reference_io,
    solve_reference_riccati, trajectory_gap, LqrSolution, Reference,
};
use ctdd::lti::{
    simulate, structural_indices, PolynomialInput, SampledTrajectory, SeriesInput, StackedSignal,
};
use ctdd::Error as CoreError;
use log::{info, warn};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::config::{Experiment, Variant};
use crate::output::{display_grid, matrix_rows, stack_header, OutDir};

pub struct Context {
    pub exp: Experiment,
    pub out: OutDir,
}

#[derive(Debug, Clone, Serialize)]
pub struct PeReport {
    pub order: usize,
    pub min_eigenvalue: f64,
    pub is_pe: bool,
    pub tolerance: f64,
}

impl From<PeCertificate<f64>> for PeReport {
    fn from(c: PeCertificate<f64>) -> Self {
        Self {
            order: c.order,
            min_eigenvalue: c.min_eigenvalue,
            is_pe: c.is_pe,
            tolerance: c.tolerance,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct GenDataReport {
    pub nodes_csv: String,
    pub grid_csv: String,
    pub columns: Vec<String>,
    pub node_count: usize,
    pub grid_count: usize,
}

#[derive(Debug, Serialize)]
pub struct KernelRep {
    pub r0: Vec<Vec<f64>>,
    pub r1: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize)]
pub struct IdentifyReport {
    pub a_tilde: Vec<Vec<f64>>,
    pub b_tilde: Vec<Vec<f64>>,
    pub residual: f64,
    pub kernel_rep: KernelRep,
    pub rank: usize,
    /// Largest entrywise deviation from the configured system.
    pub model_error: f64,
}

#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<PeReport>,
}

#[derive(Debug, Serialize)]
pub struct DdSimulateReport {
    pub n: usize,
    pub residual: f64,
    pub max_state_error: f64,
    pub csv: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct LqrRow {
    pub n: usize,
    pub j_n: f64,
    pub gap: f64,
    pub traj_gap: f64,
    pub kkt_residual: f64,
    pub constraint_residual: f64,
    pub used_fallback: bool,
}

#[derive(Debug, Serialize)]
pub struct LqrReport {
    pub variant: Variant,
    pub reference: &'static str,
    pub j_star: f64,
    pub riccati_cost: Option<f64>,
    pub pe_order: usize,
    pub min_eigenvalue: Option<f64>,
    pub rank: usize,
    pub rows: Vec<LqrRow>,
}

impl Context {
    pub fn rule(&self) -> Result<QuadratureRule<f64>> {
        Ok(gauss_legendre(self.exp.config.quadrature)?)
    }

    fn dictionary_options(&self, mcmillan: Option<usize>) -> DictionaryOptions<f64> {
        DictionaryOptions {
            pe_tol: self.exp.config.tolerances.pe,
            rank_rel_tol: self.exp.config.tolerances.rank_rel,
            force: false,
            mcmillan,
        }
    }

    /// Input stack long enough for the excitation certificate of a
    /// dictionary with stacking order `l`.
    fn input_order(&self, l: usize) -> usize {
        self.exp.pe_order().max(l + self.exp.sys.n())
    }

    fn informative(
        &self,
        rule: &QuadratureRule<f64>,
        l: usize,
        k: usize,
    ) -> Result<SampledTrajectory<f64>> {
        Ok(simulate(
            &self.exp.sys,
            self.exp.input.as_ref(),
            &self.exp.x0,
            rule,
            self.input_order(l),
            k,
        )?)
    }

    pub fn state_dictionary(&self, l: usize, k: usize) -> Result<DataDictionary<f64>> {
        let rule = self.rule()?;
        let traj = self.informative(&rule, l, k)?;
        Ok(build_dictionary(
            &traj,
            l,
            k,
            DictionaryKind::InputState,
            &self.dictionary_options(None),
        )?)
    }

    pub fn gen_data(&self) -> Result<GenDataReport> {
        let cfg = &self.exp.config;
        let (l, k) = (cfg.orders.l, cfg.orders.k);
        let rule = self.rule()?;
        let traj = self.informative(&rule, l, k)?;
        let grid = display_grid();
        let grid_rule = QuadratureRule {
            weights: vec![0.0; grid.len()],
            nodes: grid,
        };
        let grid_traj = self.informative(&grid_rule, l, k)?;

        let mut header = vec!["t".to_string()];
        header.extend(stack_header('u', traj.u.dim(), traj.u.order()));
        header.extend(stack_header('x', traj.x.dim(), traj.x.order()));
        if let Some(y) = &traj.y {
            header.extend(stack_header('y', y.dim(), y.order()));
        }
        let table = |t: &SampledTrajectory<f64>| {
            let mut blocks = vec![DMatrix::from_row_slice(1, t.rule().len(), &t.rule().nodes)];
            blocks.push(t.u.values().clone());
            blocks.push(t.x.values().clone());
            if let Some(y) = &t.y {
                blocks.push(y.values().clone());
            }
            let refs: Vec<&DMatrix<f64>> = blocks.iter().collect();
            ctdd::linalg::vstack(&refs)
        };
        let nodes_csv = self
            .out
            .write_csv("trajectory_nodes.csv", &header, &table(&traj))?;
        let grid_csv = self
            .out
            .write_csv("trajectory_grid.csv", &header, &table(&grid_traj))?;
        Ok(GenDataReport {
            nodes_csv: nodes_csv.display().to_string(),
            grid_csv: grid_csv.display().to_string(),
            columns: header,
            node_count: rule.len(),
            grid_count: grid_rule.len(),
        })
    }

    pub fn check_pe(&self, order: Option<usize>, csv: Option<&Path>) -> Result<PeReport> {
        let order = order.unwrap_or_else(|| self.exp.pe_order());
        if order == 0 {
            bail!("excitation order must be positive");
        }
        let rule = self.rule()?;
        let signal = match csv {
            Some(path) => {
                let series =
                    read_input_series(path, self.exp.sys.m(), self.exp.config.projection_order)?;
                StackedSignal::from_input(&SeriesInput::new(series), &rule, order)?
            }
            None => StackedSignal::from_input(self.exp.input.as_ref(), &rule, order)?,
        };
        let report: PeReport = check_pe(&signal, order, self.exp.config.tolerances.pe)?.into();
        self.out.write_json("pe.json", &report)?;
        Ok(report)
    }

    pub fn identify(&self) -> Result<IdentifyReport> {
        let dict = match self.state_dictionary(1, 2) {
            Ok(d) => d,
            Err(e) => {
                let certificate = match e.downcast_ref::<CoreError>() {
                    Some(CoreError::NotPersistentlyExciting {
                        order,
                        min_eigenvalue,
                        tolerance,
                    }) => Some(PeReport {
                        order: *order,
                        min_eigenvalue: *min_eigenvalue,
                        is_pe: false,
                        tolerance: *tolerance,
                    }),
                    _ => None,
                };
                self.out.write_json(
                    "identify.json",
                    &ErrorReport {
                        error: e.to_string(),
                        certificate,
                    },
                )?;
                return Err(e.context("identification data is not informative"));
            }
        };
        let id = identify(&dict)?;
        let sys = &self.exp.sys;
        let model_error = (&id.a_tilde - &sys.a)
            .amax()
            .max((&id.b_tilde - &sys.b).amax());
        let report = IdentifyReport {
            a_tilde: matrix_rows(&id.a_tilde),
            b_tilde: matrix_rows(&id.b_tilde),
            residual: id.residual,
            kernel_rep: KernelRep {
                r0: matrix_rows(&id.r0),
                r1: matrix_rows(&id.r1),
            },
            rank: dict.rank(),
            model_error,
        };
        self.out.write_json("identify.json", &report)?;
        Ok(report)
    }

    pub fn dd_simulate(&self) -> Result<DdSimulateReport> {
        let cfg = &self.exp.config.simulate;
        let sys = &self.exp.sys;
        let (n, m) = (sys.n(), sys.m());
        if cfg.u.len() != m || cfg.x0.len() != n {
            bail!("simulate.u needs {m} channels and simulate.x0 length {n}");
        }
        let width = cfg.u.iter().map(Vec::len).max().unwrap_or(0).max(1);
        let coeffs = DMatrix::from_fn(m, width, |c, j| cfg.u[c].get(j).copied().unwrap_or(0.0));
        let poly = PolynomialInput::new(coeffs);
        let rule = self.rule()?;
        let u_series = project_fn(
            |t| ctdd::lti::InputSignal::derivative(&poly, t, 0),
            &rule,
            cfg.n,
            m,
        )?;
        let dict = self.state_dictionary(1, 2)?;
        let x0 = DVector::from_vec(cfg.x0.clone());
        let sim = dd_simulate(&dict, &u_series, &x0, cfg.n)?;

        let grid = display_grid();
        let grid_rule = QuadratureRule {
            weights: vec![0.0; grid.len()],
            nodes: grid.clone(),
        };
        let model = simulate(sys, &poly, &x0, &grid_rule, 1, 1)?;
        let mut rows = DMatrix::zeros(1 + m + 2 * n, grid.len());
        let mut max_err = 0.0f64;
        for (q, &t) in grid.iter().enumerate() {
            let xd = sim.output_series.eval(t);
            let xm = model.x.node_stack(q, 1);
            max_err = max_err.max((&xd - &xm).amax());
            rows[(0, q)] = t;
            rows.view_mut((1, q), (m, 1))
                .copy_from(&sim.u_series.eval(t));
            rows.view_mut((1 + m, q), (n, 1)).copy_from(&xd);
            rows.view_mut((1 + m + n, q), (n, 1)).copy_from(&xm);
        }
        let mut header = vec!["t".to_string()];
        header.extend((0..m).map(|c| format!("u{c}")));
        header.extend((0..n).map(|i| format!("x{i}_dd")));
        header.extend((0..n).map(|i| format!("x{i}_model")));
        let csv = self.out.write_csv("dd_simulate.csv", &header, &rows)?;
        let report = DdSimulateReport {
            n: cfg.n,
            residual: sim.residual,
            max_state_error: max_err,
            csv: csv.display().to_string(),
        };
        self.out.write_json("dd_simulate.json", &report)?;
        Ok(report)
    }

    pub fn lqr(&self) -> Result<LqrReport> {
        let cfg = &self.exp.config;
        let sys = &self.exp.sys;
        let init = DVector::from_vec(cfg.lqr.x0.clone());
        let rule = self.rule()?;
        let (dict, reference, label) = match cfg.lqr.variant {
            Variant::InputState => {
                if init.len() != sys.n() {
                    bail!("lqr.x0 has length {}, expected {}", init.len(), sys.n());
                }
                let dict = self.state_dictionary(1, 2)?;
                let (reference, label) = if cfg.is_builtin() && init[0] == 1.0 {
                    (solve_reference_analytic_example(), "analytic")
                } else {
                    let q = DMatrix::identity(sys.n(), sys.n());
                    let r = DMatrix::identity(sys.m(), sys.m());
                    (
                        solve_reference_riccati(sys, &q, &r, &init, cfg.lqr.riccati_intervals)?,
                        "riccati",
                    )
                };
                (dict, reference, label)
            }
            Variant::InputOutput => {
                let idx = structural_indices(sys);
                let lag = idx.lag.max(1);
                let expected = lag * (sys.m() + sys.p());
                if init.len() != expected {
                    bail!("lqr.x0 must hold the initial stack of length {expected}");
                }
                let traj = self.informative(&rule, lag + 1, lag + 1)?;
                let dict = build_dictionary(
                    &traj,
                    lag + 1,
                    lag + 1,
                    DictionaryKind::InputOutput,
                    &self.dictionary_options(Some(idx.mcmillan)),
                )?;
                let reference = solve_reference_io(sys, lag, &init, cfg.lqr.riccati_intervals)?;
                (dict, reference, "riccati")
            }
        };
        info!("reference optimal value {:.12}", reference.cost);

        let grid = display_grid();
        let mut rows = Vec::new();
        for &n in &cfg.lqr.n {
            let sol = match cfg.lqr.variant {
                Variant::InputState => solve_dd_lqr_state(&dict, &init, n, None)?,
                Variant::InputOutput => solve_dd_lqr_io(&dict, &init, n, None)?,
            };
            let kkt_ok = sol.kkt_residual <= cfg.tolerances.kkt * (1.0 + sol.z_norm)
                && sol.constraint_residual <= cfg.tolerances.kkt * (1.0 + sol.rhs_norm);
            if !kkt_ok {
                warn!(
                    "N = {n}: KKT residuals {:.2e} / {:.2e} exceed tolerance",
                    sol.kkt_residual, sol.constraint_residual
                );
            }
            self.write_lqr_trajectory(&sol, &reference, &grid, cfg.lqr.variant)?;
            rows.push(LqrRow {
                n,
                j_n: sol.cost,
                gap: sol.cost - reference.cost,
                traj_gap: trajectory_gap(&sol, &reference)?,
                kkt_residual: sol.kkt_residual,
                constraint_residual: sol.constraint_residual,
                used_fallback: sol.used_fallback,
            });
        }
        let records: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                vec![
                    r.n.to_string(),
                    crate::output::fmt_float(r.j_n),
                    crate::output::fmt_float(r.gap),
                    crate::output::fmt_float(r.traj_gap),
                ]
            })
            .collect();
        self.out.write_records(
            "gaps.csv",
            &["N", "J_N", "gap", "traj_gap"].map(String::from),
            &records,
        )?;
        let report = LqrReport {
            variant: cfg.lqr.variant,
            reference: label,
            j_star: reference.cost,
            riccati_cost: reference.riccati_cost,
            pe_order: dict.certificate.map_or(0, |c| c.order),
            min_eigenvalue: dict.certificate.map(|c| c.min_eigenvalue),
            rank: dict.rank(),
            rows,
        };
        self.out.write_json("report.json", &report)?;
        Ok(report)
    }

    fn write_lqr_trajectory(
        &self,
        sol: &LqrSolution<f64>,
        reference: &Reference<f64>,
        grid: &[f64],
        variant: Variant,
    ) -> Result<()> {
        let (m, q) = (sol.u_series.dim(), sol.x_series.dim());
        let w = match variant {
            Variant::InputState => 'x',
            Variant::InputOutput => 'y',
        };
        let name = |s: char, d: usize, c: usize, tag: &str| {
            if d == 1 {
                format!("{s}_{tag}")
            } else {
                format!("{s}{c}_{tag}")
            }
        };
        let mut header = vec!["t".to_string()];
        header.extend((0..m).map(|c| name('u', m, c, "N")));
        header.extend((0..q).map(|c| name(w, q, c, "N")));
        header.extend((0..m).map(|c| name('u', m, c, "star")));
        header.extend((0..q).map(|c| name(w, q, c, "star")));
        let mut rows = DMatrix::zeros(1 + 2 * (m + q), grid.len());
        for (i, &t) in grid.iter().enumerate() {
            rows[(0, i)] = t;
            rows.view_mut((1, i), (m, 1))
                .copy_from(&sol.u_series.eval(t));
            rows.view_mut((1 + m, i), (q, 1))
                .copy_from(&sol.x_series.eval(t));
            rows.view_mut((1 + m + q, i), (m, 1))
                .copy_from(&reference.input(t));
            rows.view_mut((1 + 2 * m + q, i), (q, 1))
                .copy_from(&reference.output(t));
        }
        self.out
            .write_csv(&format!("trajectory_N{:02}.csv", sol.n), &header, &rows)?;
        Ok(())
    }
}

/// Reads `t` and `u{c}_d0` columns and fits an order-`order` series.
pub fn read_input_series(path: &Path, m: usize, order: usize) -> Result<ctdd::LegendreSeries<f64>> {
    let mut reader =
        csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let t_col = find("t").ok_or_else(|| anyhow!("{}: missing column 't'", path.display()))?;
    let u_cols: Vec<usize> = (0..m)
        .map(|c| {
            find(&format!("u{c}_d0"))
                .ok_or_else(|| anyhow!("{}: missing column 'u{c}_d0'", path.display()))
        })
        .collect::<Result<_>>()?;
    let mut times = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |col: usize| -> Result<f64> {
            record
                .get(col)
                .ok_or_else(|| anyhow!("row {}: missing value", line + 2))?
                .trim()
                .parse::<f64>()
                .with_context(|| format!("row {}: not a number", line + 2))
        };
        times.push(parse(t_col)?);
        for &c in &u_cols {
            values.push(parse(c)?);
        }
    }
    if times.len() < order {
        bail!(
            "{} holds {} samples, fewer than the projection order {order}",
            path.display(),
            times.len()
        );
    }
    if times.iter().any(|t| !(-1.0..=1.0).contains(t)) {
        bail!("{}: sample times must lie in [-1, 1]", path.display());
    }
    let samples = DMatrix::from_column_slice(m, times.len(), &values);
    Ok(fit_series(&times, &samples, order)?)
}

/// Optimality gaps of the built-in example for `N = 1, ..., 10`.
pub const PUBLISHED_GAPS: [f64; 10] = [
    3.59e0, 4.11e-1, 3.36e-2, 1.70e-3, 4.79e-5, 9.58e-7, 1.25e-8, 1.30e-10, 9.72e-13, 1.73e-14,
];

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub expected: String,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct ReproduceReport {
    pub checks: Vec<Check>,
    pub passed: usize,
    pub failed: usize,
}

impl ReproduceReport {
    fn push(
        &mut self,
        name: impl Into<String>,
        value: f64,
        expected: impl Into<String>,
        pass: bool,
    ) {
        if pass {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        self.checks.push(Check {
            name: name.into(),
            value,
            expected: expected.into(),
            pass,
        });
    }
}

/// Runs the full pipeline on the built-in example and checks the results.
pub fn reproduce(ctx: &Context) -> Result<ReproduceReport> {
    let mut report = ReproduceReport {
        checks: Vec::new(),
        passed: 0,
        failed: 0,
    };

    let data = ctx.gen_data()?;
    let rule = ctx.rule()?;
    let traj = ctx.informative(&rule, 1, 2)?;
    let state_err = rule
        .nodes
        .iter()
        .enumerate()
        .map(|(q, &t)| (traj.x.values()[(0, q)] - example_state(t)).abs())
        .fold(0.0, f64::max);
    report.push(
        "trajectory matches closed form",
        state_err,
        "<= 1e-10",
        state_err <= 1e-10,
    );

    let pe3 = ctx.check_pe(Some(3), None)?;
    report.push(
        "input t^2 is PE of order 3",
        pe3.min_eigenvalue,
        "0.1729 +- 1e-3",
        pe3.is_pe && (pe3.min_eigenvalue - 0.1729).abs() <= 1e-3,
    );
    let from_csv = ctx.check_pe(Some(3), Some(Path::new(&data.nodes_csv)))?;
    let dev = (from_csv.min_eigenvalue - pe3.min_eigenvalue).abs();
    report.push("PE certificate from CSV data", dev, "<= 1e-6", dev <= 1e-6);
    let pe4 = ctx.check_pe(Some(4), None)?;
    report.push(
        "input t^2 is not PE of order 4",
        pe4.min_eigenvalue,
        "not PE",
        !pe4.is_pe,
    );

    for (l, expected) in [(1usize, 2usize), (2, 3)] {
        let dict = ctx.state_dictionary(l, 2)?;
        report.push(
            format!("rank of joint Gramian (L = {l}, K = 2)"),
            dict.rank() as f64,
            expected.to_string(),
            dict.rank() == expected,
        );
    }

    let id = ctx.identify()?;
    report.push(
        "identified model",
        id.model_error,
        "<= 1e-8",
        id.model_error <= 1e-8,
    );

    let sim = ctx.dd_simulate()?;
    report.push(
        "data-driven simulation",
        sim.max_state_error,
        "<= 1e-8",
        sim.max_state_error <= 1e-8 && sim.residual <= 1e-8,
    );

    let lqr = ctx.lqr()?;
    report.push(
        "optimal value J*",
        lqr.j_star,
        "0.4125 +- 5e-4",
        (lqr.j_star - 0.4125).abs() <= 5e-4,
    );
    for row in &lqr.rows {
        let Some(&published) = PUBLISHED_GAPS.get(row.n.wrapping_sub(1)) else {
            continue;
        };
        let (pass, expected) = if published > 1e-10 {
            (
                (row.gap - published).abs() <= 0.05 * published,
                format!("{published:.2e} +- 5%"),
            )
        } else {
            (
                row.gap >= -1e-12 && row.gap <= 1e-10,
                "in [0, 1e-10]".to_string(),
            )
        };
        report.push(
            format!("optimality gap N = {}", row.n),
            row.gap,
            expected,
            pass,
        );
    }

    ctx.out.write_json("summary.json", &report)?;
    Ok(report)
}

/// State of the built-in example under `u = t^2` from rest.
pub fn example_state(t: f64) -> f64 {
    t * t - 2.0 * t + 2.0 - 5.0 * (-(t + 1.0)).exp()
}
