use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use omninav::mapping::{map_stats, project_to_plane, OccupancyGridMap, WorldPointCloud};
use omninav::planner::{benchmark_planners, write_bench_csv, BenchConfig, PlannerMethod};
use omninav::sim::{
    calibrate_scale, corridor_map, read_calibration_pairs, rmse, run_episode, warehouse_scenario, NoiseModel,
    SimError,
};
use omninav::{EpisodeLog, GridCell, RunConfig};

#[derive(Parser)]
#[command(name = "omninav", version, about = "Grid mapping, planning and closed-loop simulation")]
struct Cli {
    /// TOML run configuration; missing sections fall back to defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    Default,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum Synthetic {
    Warehouse,
    Corridor,
}

#[derive(Subcommand)]
enum Command {
    /// Plan a path and print one `h v` line per cell.
    Plan {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        start: GridCell,
        #[arg(long, allow_hyphen_values = true)]
        end: GridCell,
        /// astar_heap, astar_list or dijkstra (`heap` and `list` also work).
        #[arg(long, default_value = "astar_heap")]
        method: PlannerMethod,
    },
    /// Time the three planners on random maps.
    Bench {
        /// Comma-separated `WxH` sizes.
        #[arg(long, value_delimiter = ',', default_value = "168x120,336x240,672x480")]
        sizes: Vec<String>,
        #[arg(long, default_value_t = 50)]
        pairs: usize,
        #[arg(long, default_value_t = 0.25)]
        density: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// CSV output; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one closed-loop episode and write its log.
    Simulate {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        start: GridCell,
        #[arg(long, allow_hyphen_values = true)]
        goal: GridCell,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        noise: Option<NoiseArg>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a scale factor to `real,measured` pairs.
    Calibrate {
        #[arg(long)]
        pairs: PathBuf,
    },
    /// Tracking error of an episode log, in camera units and metres.
    Rmse {
        #[arg(long)]
        episode: PathBuf,
    },
    /// Build an occupancy map from an `x y z` point file or a synthetic layout.
    BuildMap {
        #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
        cloud: Option<PathBuf>,
        #[arg(long, value_enum)]
        synthetic: Option<Synthetic>,
        /// Corridor length in cells.
        #[arg(long, default_value_t = 10)]
        length: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the HTTP/WebSocket service.
    Serve {
        /// Overrides OMNINAV_BIND.
        #[arg(long)]
        bind: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn load_map(path: &Path) -> Result<OccupancyGridMap> {
    OccupancyGridMap::read_text(open(path)?).with_context(|| format!("reading map {}", path.display()))
}

fn parse_size(s: &str) -> Result<(usize, usize)> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .with_context(|| format!("size {s:?} is not WxH"))?;
    Ok((w.trim().parse()?, h.trim().parse()?))
}

fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Plan { map, start, end, method } => {
            let map = load_map(&map)?;
            let window = map.window(cfg.episode.inflation);
            let (path, stats) = method.plan(start, end, &window)?;
            let mut out = io::stdout().lock();
            for c in &path.cells {
                writeln!(out, "{} {}", c.h, c.v)?;
            }
            eprintln!("cost {} expanded {}", path.cost(), stats.expanded);
        }
        Command::Bench {
            sizes,
            pairs,
            density,
            seed,
            out,
        } => {
            if !(0.0..1.0).contains(&density) || pairs == 0 {
                bail!("density must be in [0, 1) and pairs positive");
            }
            let sizes = sizes.iter().map(|s| parse_size(s)).collect::<Result<Vec<_>>>()?;
            let rows = benchmark_planners(&BenchConfig {
                sizes,
                pairs,
                obstacle_density: density,
                seed,
            });
            match out {
                Some(p) => {
                    let mut w = create(&p)?;
                    write_bench_csv(&rows, &mut w)?;
                    w.flush()?;
                }
                None => write_bench_csv(&rows, io::stdout().lock())?,
            }
        }
        Command::Simulate {
            map,
            start,
            goal,
            seed,
            noise,
            out,
        } => {
            let map = load_map(&map)?;
            let mut ep = cfg.episode.clone();
            if let Some(s) = seed {
                ep.seed = s;
            }
            match noise {
                Some(NoiseArg::Off) => ep.noise = NoiseModel::OFF,
                Some(NoiseArg::Default) => ep.noise = NoiseModel::default(),
                None => {}
            }
            let (log, code) = match run_episode(&map, start, goal, &ep) {
                Ok(log) => (log, ExitCode::SUCCESS),
                Err(SimError::Timeout(log)) => {
                    eprintln!("tick budget of {} exhausted; writing the partial log", ep.tick_budget);
                    (*log, ExitCode::from(2))
                }
                Err(e) => return Err(e.into()),
            };
            let mut w = create(&out)?;
            log.write_csv(&mut w)?;
            w.flush()?;
            print_rmse(&log, &cfg)?;
            println!("ticks {} path_cells {}", log.records.len(), log.path.len());
            return Ok(code);
        }
        Command::Calibrate { pairs } => {
            let pairs = read_calibration_pairs(open(&pairs)?)?;
            let k = calibrate_scale(&pairs)?;
            println!("k {k:.6} pairs {}", pairs.len());
        }
        Command::Rmse { episode } => {
            let log = EpisodeLog::read_csv(open(&episode)?)?;
            print_rmse(&log, &cfg)?;
        }
        Command::BuildMap {
            cloud,
            synthetic,
            length,
            seed,
            out,
        } => {
            let m = &cfg.map;
            let map = match (cloud, synthetic) {
                (Some(path), _) => {
                    let cloud = WorldPointCloud::read_xyz(open(&path)?)?;
                    OccupancyGridMap::from_planar(&project_to_plane(&cloud), m.cell_h, m.cell_v, m.threshold)?
                }
                (None, Some(Synthetic::Warehouse)) => warehouse_scenario(seed).map,
                (None, Some(Synthetic::Corridor)) => corridor_map(length, m.cell_h, seed),
                (None, None) => unreachable!("clap requires one source"),
            };
            let mut w = create(&out)?;
            map.write_text(&mut w)?;
            w.flush()?;
            let (h, v) = (map.h_range(), map.v_range());
            println!("h {}..{} v {}..{}", h.0, h.1, v.0, v.1);
            if let Ok(s) = map_stats(&map, cfg.scale.k_sh, cfg.scale.k_sv) {
                println!("size {:.3} x {:.3} m ratio {:.3}", s.length_m, s.width_m, s.ratio);
            }
        }
        Command::Serve { bind } => {
            let settings = match &cli.config {
                Some(p) => omninav_service::Settings::load(p)?,
                None => omninav_service::Settings::from_env()?,
            };
            let addr = bind.unwrap_or_else(omninav_service::bind_addr_from_env);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind(&addr)
                    .await
                    .with_context(|| format!("binding {addr}"))?;
                eprintln!("listening on {}", listener.local_addr()?);
                omninav_service::serve(settings, listener).await
            })?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn print_rmse(log: &EpisodeLog, cfg: &RunConfig) -> Result<()> {
    let cam = rmse(log)?;
    let m = cam.to_metric(&cfg.scale);
    println!("rmse_camera x {:.6} z {:.6} track {:.6}", cam.x, cam.z, cam.track);
    println!("rmse_metric x {:.6} z {:.6} track {:.6}", m.x, m.z, m.track);
    println!("phase {}", log.final_phase().map_or("none", |p| p.as_str()));
    Ok(())
}
