use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use cim_core::cim::{best_lag, LagSet};
use cim_core::connectivity::{build_map, default_lag_set, ConnectivityMap};
use cim_core::decode::{decode_pipeline, load_feature_table};
use cim_core::embedding::{embed_multivariate, EmbeddingSpec, PointCloud};
use cim_core::fractal::{estimate_dimension, DimensionConfig, GridSize, Method};
use cim_core::io::{load_matrix, load_recording, save_recording, slice_window, write_int_matrix, write_matrix, zscore, Recording, WindowSpec};
use cim_core::oracle::{brute_force_betti, ksg_mutual_information_seeded};
use cim_core::synth::{simulate, SynthConfig, SystemKind};
use cim_core::topology::{betti_trajectory, persistent_homology, rank_filtration, Barcode, Order};

use crate::{Command, DimMethod, OracleCommand, Output, Policy, RecordingArgs, System};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] cim_core::Error),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

type Result<T> = std::result::Result<T, CliError>;

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn emit<T: Serialize>(output: &Output, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(cim_core::Error::from)?;
    text.push('\n');
    match &output.out {
        Some(p) => {
            let mut w = create(p)?;
            w.write_all(text.as_bytes())
                .and_then(|_| w.flush())
                .map_err(|source| CliError::Write { path: p.clone(), source })
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load(args: &RecordingArgs) -> Result<Recording> {
    let rec = load_recording(&args.input, args.sample_rate)?;
    Ok(if args.no_zscore { rec } else { zscore(&rec)? })
}

fn parse_window(s: &str) -> Result<(usize, usize)> {
    let bad = || CliError::Usage(format!("window must be START,LEN, got {s:?}"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn point_cloud_from_csv(path: &Path) -> Result<PointCloud> {
    let rec = load_recording(path, 1.0)?;
    let cols: Vec<&[f64]> = rec.samples.iter().map(Vec::as_slice).collect();
    Ok(PointCloud::from_columns(&cols)?)
}

fn barcode_rows(bc: &Barcode) -> Vec<Vec<i64>> {
    bc.intervals
        .iter()
        .map(|iv| vec![iv.dim as i64, iv.birth as i64, iv.death.map_or(-1, |d| d as i64)])
        .collect()
}

fn write_rows(path: &Path, header: Option<&[String]>, rows: &[Vec<i64>]) -> Result<()> {
    let mut w = create(path)?;
    let mut text = String::new();
    if let Some(h) = header {
        text.push_str(&h.join(","));
        text.push('\n');
    }
    for r in rows {
        let cells: Vec<String> = r.iter().map(i64::to_string).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|source| CliError::Write {
            path: path.to_path_buf(),
            source,
        })
}

fn filtration_from(path: &Path, order: Order, policy: Option<Policy>) -> Result<cim_core::topology::RankFiltration> {
    let mut m = load_matrix(path)?;
    if let Some(p) = policy {
        let n = m.len();
        for k in 0..n {
            for j in (k + 1)..n {
                let v = match p {
                    Policy::Max => m[k][j].max(m[j][k]),
                    Policy::Mean => 0.5 * (m[k][j] + m[j][k]),
                };
                m[k][j] = v;
                m[j][k] = v;
            }
        }
    }
    Ok(rank_filtration(&m, order)?)
}

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate {
            system,
            n,
            seed,
            a,
            coupling,
            snr_db,
            y_lag2,
            csv,
            output,
        } => {
            let kind = match system {
                System::Linear => SystemKind::Linear,
                System::Ar => SystemKind::Ar,
                System::Henon => SystemKind::Henon,
                System::Sine => SystemKind::Sine,
            };
            let cfg = SynthConfig {
                a,
                coupling,
                snr_db,
                y_lag2_variant: y_lag2,
                ..SynthConfig::new(kind, n, seed)
            };
            let rec = simulate(&cfg)?;
            save_recording(&csv, &rec)?;
            emit(&output, &cfg)
        }
        Command::Embed { rec, spec, output } => {
            let text = if Path::new(&spec).is_file() {
                std::fs::read_to_string(&spec).map_err(|e| cim_core::Error::io(&spec, e))?
            } else {
                spec
            };
            let spec = EmbeddingSpec::from_json(&text)?;
            let recording = load(&rec)?;
            let series = spec
                .series
                .iter()
                .map(|s| recording.channel(&s.id))
                .collect::<cim_core::Result<Vec<&[f64]>>>()?;
            let cloud = embed_multivariate(&series, &spec)?;
            let points: Vec<&[f64]> = cloud.points().collect();
            emit(
                &output,
                &json!({
                    "spec": spec,
                    "ambient_dim": cloud.ambient_dim(),
                    "count": cloud.count(),
                    "zscored": !rec.no_zscore,
                    "points": points,
                }),
            )
        }
        Command::Dim {
            input,
            method,
            radii_per_decade,
            seed,
            output,
        } => {
            let cloud = point_cloud_from_csv(&input)?;
            let mut cfg = DimensionConfig { seed, ..DimensionConfig::default() };
            if let Some(k) = radii_per_decade {
                cfg.grid = GridSize::PerDecade(k);
            }
            let method = match method {
                DimMethod::Corr => Method::Corr,
                DimMethod::Box => Method::Box,
            };
            let est = estimate_dimension(&cloud, method, &cfg)?;
            emit(
                &output,
                &json!({
                    "value": est.value,
                    "fit_lo": est.fit_lo,
                    "fit_hi": est.fit_hi,
                    "r_squared": est.r_squared,
                    "stderr": est.stderr,
                    "method": est.method,
                    "exceeds_ambient": est.exceeds_ambient,
                    "seed": seed,
                }),
            )
        }
        Command::Cim {
            rec,
            source,
            target,
            max_lag,
            include_zero,
            seed,
            output,
        } => {
            let recording = load(&rec)?;
            let x = recording.channel(&target)?;
            let y = recording.channel(&source)?;
            let lags = default_lag_set(max_lag, include_zero)?;
            let cfg = DimensionConfig { seed, ..DimensionConfig::default() };
            let r = best_lag(x, y, &lags, &cfg)?.with_channels(source, target);
            emit(&output, &r)
        }
        Command::Connmap {
            rec,
            window,
            max_lag,
            include_zero,
            seed,
            adjacency,
            lags,
            output,
        } => {
            let (start, len) = parse_window(&window)?;
            let w = WindowSpec::new(start, len);
            let raw = load_recording(&rec.input, rec.sample_rate)?;
            let sliced = slice_window(&raw, w)?;
            let sliced = if rec.no_zscore { sliced } else { zscore(&sliced)? };
            let lag_set: LagSet = default_lag_set(max_lag, include_zero)?;
            let cfg = DimensionConfig { seed, ..DimensionConfig::default() };
            let map = ConnectivityMap {
                window: Some(w),
                ..build_map(&sliced, &lag_set, &cfg)?
            };
            write_matrix(create(&adjacency)?, &map.weight_rows())?;
            write_int_matrix(create(&lags)?, &map.lag_rows())?;
            emit(
                &output,
                &json!({
                    "window": w,
                    "lag_set": map.lag_set,
                    "seed": seed,
                    "channel_ids": map.channel_ids,
                    "zscored": !rec.no_zscore,
                }),
            )
        }
        Command::Topo {
            input,
            max_dim,
            descending,
            symmetrize: policy,
            barcode,
            trajectory,
            output,
        } => {
            let order = if descending { Order::Descending } else { Order::Ascending };
            let filt = filtration_from(&input, order, policy)?;
            let bc = persistent_homology(&filt, max_dim);
            let trajs: Vec<_> = (0..=max_dim).map(|q| betti_trajectory(&bc, q, filt.n_edges())).collect();
            if let Some(p) = barcode {
                write_rows(&p, None, &barcode_rows(&bc))?;
            }
            if let Some(p) = trajectory {
                let mut header = vec!["rank".to_string()];
                header.extend((0..=max_dim).map(|q| format!("beta{q}")));
                let rows: Vec<Vec<i64>> = (0..=filt.n_edges())
                    .map(|i| {
                        let mut r = vec![i as i64];
                        r.extend(trajs.iter().map(|t| t.values[i] as i64));
                        r
                    })
                    .collect();
                write_rows(&p, Some(&header), &rows)?;
            }
            let integrated: BTreeMap<String, u64> =
                trajs.iter().map(|t| (t.dim.to_string(), t.integrated)).collect();
            emit(
                &output,
                &json!({
                    "integrated_betti": integrated,
                    "n_nodes": filt.n_nodes,
                    "n_edges": filt.n_edges(),
                    "order": order,
                }),
            )
        }
        Command::Decode {
            train,
            test,
            alpha,
            folds,
            screen_level,
            seed,
            output,
        } => {
            let tr = load_feature_table(&train)?;
            let te = load_feature_table(&test)?;
            let report = decode_pipeline(&tr, &te, alpha, folds, screen_level, seed)?;
            emit(&output, &report)
        }
        Command::Oracle(OracleCommand::Ksg {
            input,
            x,
            y,
            k,
            seed,
            output,
        }) => {
            let rec = load_recording(&input, 1.0)?;
            let pick = |names: &str| -> Result<PointCloud> {
                let cols = names
                    .split(',')
                    .map(|c| rec.channel(c.trim()))
                    .collect::<cim_core::Result<Vec<&[f64]>>>()?;
                Ok(PointCloud::from_columns(&cols)?)
            };
            let est = ksg_mutual_information_seeded(&pick(&x)?, &pick(&y)?, k, seed)?;
            emit(&output, &json!({ "estimate": est, "seed": seed }))
        }
        Command::Oracle(OracleCommand::Betti {
            input,
            max_dim,
            descending,
            output,
        }) => {
            let order = if descending { Order::Descending } else { Order::Ascending };
            let filt = filtration_from(&input, order, None)?;
            let bc = brute_force_betti(&filt, max_dim)?;
            emit(&output, &json!({ "intervals": barcode_rows(&bc), "n_edges": bc.n_edges }))
        }
    }
}
