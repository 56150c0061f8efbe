//! Region data behind the published figures.

use erasure_bc::channel::ChannelParams;
use erasure_bc::regions::{region_dd_outer, region_nn_blind_inner, region_nn_nonblind, RateRegion};

pub const FIGURE_IDS: [&str; 6] = ["2", "3a", "3b", "4a", "4b", "5"];

/// Default parameters of figure 5, whose caption gives only the regime.
pub fn figure5_default() -> ChannelParams {
    ChannelParams { delta1: 0.25, delta2: 0.5, eps1: 0.0, eps2: 0.5 }
}

pub struct FigureRegion {
    /// File name inside the output directory.
    pub file: String,
    /// Value of the `label` column.
    pub label: String,
    pub region: RateRegion,
}

fn params(d1: f64, d2: f64, e1: f64, e2: f64) -> Result<ChannelParams, String> {
    ChannelParams::new(d1, d2, e1, e2).map_err(|e| e.to_string())
}

fn entry(
    file: String,
    label: String,
    build: fn(&ChannelParams) -> Result<RateRegion, erasure_bc::error::RegionError>,
    p: ChannelParams,
) -> Result<FigureRegion, String> {
    let region = build(&p).map_err(|e| e.to_string())?;
    Ok(FigureRegion { file, label, region })
}

/// Regions of figure `id`. `fig5` replaces the figure-5 parameters.
pub fn figure(id: &str, fig5: ChannelParams) -> Result<Vec<FigureRegion>, String> {
    let mut out = Vec::new();
    match id {
        "2" => {
            for eps in [0.0, 0.5, 1.0] {
                out.push(entry(
                    format!("fig2_eps{eps}.csv"),
                    format!("dd-outer delta=0.5 eps={eps}"),
                    region_dd_outer,
                    params(0.5, 0.5, eps, eps)?,
                )?);
            }
        }
        "3a" => {
            for (e1, e2) in [(1.0, 1.0), (0.0, 1.0), (1.0, 0.0), (0.0, 0.0)] {
                out.push(entry(
                    format!("fig3a_eps{e1}_{e2}.csv"),
                    format!("nn-nonblind delta=(0.5,0.75) eps=({e1},{e2})"),
                    region_nn_nonblind,
                    params(0.5, 0.75, e1, e2)?,
                )?);
            }
        }
        "3b" => {
            out.push(entry(
                "fig3b_benchmark.csv".into(),
                "nn-nonblind delta=(0.5,0.75) eps=(1,1)".into(),
                region_nn_nonblind,
                params(0.5, 0.75, 1.0, 1.0)?,
            )?);
            for e1 in [1.0, 0.75, 0.5, 0.25, 0.0] {
                out.push(entry(
                    format!("fig3b_eps1_{e1}.csv"),
                    format!("nn-nonblind delta=(0.5,0.75) eps=({e1},0.5)"),
                    region_nn_nonblind,
                    params(0.5, 0.75, e1, 0.5)?,
                )?);
            }
        }
        "4a" => {
            let third = 1.0 / 3.0;
            out.push(entry(
                "fig4a_benchmark.csv".into(),
                "nn-nonblind delta=(1/3,1/2) eps=(1,1)".into(),
                region_nn_nonblind,
                params(third, 0.5, 1.0, 1.0)?,
            )?);
            out.push(entry(
                "fig4a.csv".into(),
                "nn-nonblind delta=(1/3,1/2) eps=(2/3,1/6)".into(),
                region_nn_nonblind,
                params(third, 0.5, 2.0 / 3.0, 1.0 / 6.0)?,
            )?);
        }
        "4b" => {
            for eps in [1.0, 0.5, 0.0] {
                out.push(entry(
                    format!("fig4b_eps{eps}.csv"),
                    format!("nn-nonblind delta=0.5 eps={eps}"),
                    region_nn_nonblind,
                    params(0.5, 0.5, eps, eps)?,
                )?);
            }
        }
        "5" => {
            let p = fig5;
            let tag = format!("delta=({},{}) eps=({},{})", p.delta1, p.delta2, p.eps1, p.eps2);
            out.push(entry("fig5_outer.csv".into(), format!("nn-nonblind {tag}"), region_nn_nonblind, p)?);
            out.push(entry("fig5_inner.csv".into(), format!("nn-blind-inner {tag}"), region_nn_blind_inner, p)?);
        }
        other => {
            return Err(format!("unknown figure `{other}`; expected one of {}", FIGURE_IDS.join(", ")));
        }
    }
    Ok(out)
}
