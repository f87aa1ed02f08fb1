//! Command implementations: merge flags over the config file, resolve the
//! cluster, run, write CSVs.

use std::fs;
use std::path::{Path, PathBuf};

use fabricsim::beff::{self, BeffConfig};
use fabricsim::mesh::{
    self, generate_rect_mesh, load_mesh, partition, partition_stats, save_mesh, PartitionMethod,
    SeaSide,
};
use fabricsim::perfmodel::{self, TransferMode};
use fabricsim::swe::{self, DistributedConfig, DistributedSolver, PipelineConfig, ScalingConfig};

use crate::config::{resolve_cluster, ExperimentFile, ResolvedCluster};
use crate::{BeffArgs, CliError, CommonArgs, MeshCmd, ModelArgs, ScalingArgs, SolveArgs};

fn load_file(common: &CommonArgs, expected_workload: &str) -> Result<ExperimentFile, CliError> {
    let file = match &common.config {
        Some(path) => ExperimentFile::load(path)?,
        None => ExperimentFile::default(),
    };
    if let Some(w) = &file.workload {
        if w != expected_workload {
            return Err(CliError::Config(format!(
                "config declares workload `{w}` but the command runs `{expected_workload}`"
            )));
        }
    }
    Ok(file)
}

fn out_dir(common: &CommonArgs, file: &ExperimentFile) -> Result<PathBuf, CliError> {
    let dir = common
        .out_dir
        .clone()
        .or_else(|| file.out_dir.clone())
        .unwrap_or_else(|| "out".to_string());
    let path = PathBuf::from(dir);
    fs::create_dir_all(&path)?;
    Ok(path)
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn trace_enabled(common: &CommonArgs, file: &ExperimentFile) -> bool {
    common.trace || file.trace.unwrap_or(false)
}

/// Print the fully resolved configuration as TOML.
fn dump_config(
    workload: &str,
    file: &ExperimentFile,
    cluster: &ResolvedCluster,
    common: &CommonArgs,
) -> Result<(), CliError> {
    let mut effective = file.clone();
    effective.workload = Some(workload.to_string());
    effective.out_dir = Some(
        common
            .out_dir
            .clone()
            .or_else(|| file.out_dir.clone())
            .unwrap_or_else(|| "out".to_string()),
    );
    effective.trace = Some(trace_enabled(common, file));
    effective.cluster.preset = cluster.preset.clone();
    effective.cluster.link = Some(cluster.link);
    effective.cluster.scheduling = Some(cluster.scheduling);
    effective.cluster.memory = Some(cluster.memory);
    effective.cluster.transport = Some(cluster.transport);
    effective.cluster.mode = Some(cluster.mode);
    effective.cluster.pipeline = Some(cluster.pipeline);
    let text = toml::to_string_pretty(&effective)
        .map_err(|e| CliError::Runtime(format!("cannot serialize config: {e}")))?;
    print!("{text}");
    Ok(())
}

pub fn beff(args: BeffArgs) -> Result<(), CliError> {
    let file = load_file(&args.common, "beff")?;
    let cluster = resolve_cluster(&file.cluster, args.common.preset.as_deref())?;
    if args.common.dump_config {
        return dump_config("beff", &file, &cluster, &args.common);
    }
    let out = out_dir(&args.common, &file)?;
    let cfg = BeffConfig {
        node_count: args.nodes.or(file.beff.nodes).unwrap_or(2),
        message_sizes: file.beff.sizes.clone().unwrap_or_else(beff::default_sizes),
        repetitions: args.repetitions.or(file.beff.repetitions).unwrap_or(10),
        mode: cluster.mode,
        trace: trace_enabled(&args.common, &file),
    };
    let result = beff::run(&cfg, &cluster.cluster_config())?;
    write(&out.join("beff.csv"), &result.to_csv())?;
    write(&out.join("beff_model_error.csv"), &result.model_error_csv())?;
    if let Some(trace) = &result.trace {
        write(&out.join("trace.log"), trace)?;
    }
    println!(
        "b_eff: {} nodes, {} sizes, effective bandwidth {:.3} GB/s",
        cfg.node_count,
        cfg.message_sizes.len(),
        result.effective_bandwidth / 1e9
    );
    for row in &result.per_size {
        if row.size == 64 {
            println!("64 B ping-ping latency: {:.3} us", row.latency * 1e6);
        }
    }
    Ok(())
}

fn parse_sea_side(s: &str) -> Result<SeaSide, CliError> {
    match s {
        "north" => Ok(SeaSide::North),
        "south" => Ok(SeaSide::South),
        "east" => Ok(SeaSide::East),
        "west" => Ok(SeaSide::West),
        "closed" => Ok(SeaSide::Closed),
        other => Err(CliError::Config(format!(
            "unknown sea side `{other}` (north|south|east|west|closed)"
        ))),
    }
}

fn parse_method(s: &str) -> Result<PartitionMethod, CliError> {
    match s {
        "bisection" | "coordinate-bisection" => Ok(PartitionMethod::CoordinateBisection),
        "greedy-bfs" => Ok(PartitionMethod::GreedyBfs),
        other => Err(CliError::Config(format!(
            "unknown partition method `{other}` (bisection|greedy-bfs)"
        ))),
    }
}

fn parse_list(s: &str) -> Result<Vec<u32>, CliError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| CliError::Config(format!("bad k list entry `{t}`")))
        })
        .collect()
}

pub fn swe_solve(args: SolveArgs) -> Result<(), CliError> {
    let file = load_file(&args.common, "swe-solve")?;
    let cluster = resolve_cluster(&file.cluster, args.common.preset.as_deref())?;
    if args.common.dump_config {
        return dump_config("swe-solve", &file, &cluster, &args.common);
    }
    let out = out_dir(&args.common, &file)?;

    let mesh = match args.mesh.as_deref().or(file.swe.mesh_file.as_deref()) {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read mesh {path}: {e}")))?;
            load_mesh(&text)?
        }
        None => {
            let nx = args.nx.or(file.swe.nx).unwrap_or(20);
            let ny = args.ny.or(file.swe.ny).unwrap_or(16);
            let side = match args.sea_side.as_deref() {
                Some(s) => parse_sea_side(s)?,
                None => file.swe.sea_side.unwrap_or(SeaSide::East),
            };
            generate_rect_mesh(nx, ny, side)
        }
    };
    let k = args.k.or(file.swe.k).unwrap_or(1);
    let method = match args.method.as_deref() {
        Some(m) => parse_method(m)?,
        None => file.swe.method.unwrap_or(PartitionMethod::CoordinateBisection),
    };
    let steps = args.steps.or(file.swe.steps).unwrap_or(100);
    let depth = file.swe.depth.unwrap_or(2.0);
    let sea = file.swe.sea.unwrap_or(swe::SeaForcing::Tidal {
        mean: depth,
        amplitude: 0.1 * depth,
        period: 100.0,
    });
    let solver_cfg = swe::SolverConfig {
        gravity: 9.81,
        dt: args.dt.or(file.swe.dt).unwrap_or(0.02),
        sea,
    };
    let snapshot_every = args.snapshot_every.or(file.swe.snapshot_every).unwrap_or(0);
    let check_oracle = args.check_oracle || file.swe.check_oracle.unwrap_or(false);

    let partitioning = partition(&mesh, k, method)?;
    let initial = swe::initial_rest(&mesh, depth);
    let mut solver = DistributedSolver::new(
        &mesh,
        &partitioning,
        solver_cfg,
        PipelineConfig::from_preset(&cluster.pipeline),
        cluster.cluster_config(),
        DistributedConfig::default(),
        initial.clone(),
    )?;
    if trace_enabled(&args.common, &file) {
        solver.enable_trace();
    }
    let mut reference = check_oracle.then_some(initial);
    for step in 0..steps {
        solver.step()?;
        if let Some(r) = reference.take() {
            reference = Some(swe::step_reference(&mesh, &r, &solver_cfg, step)?);
        }
        if snapshot_every > 0 && (step + 1) % snapshot_every == 0 {
            write(
                &out.join(format!("state_{:06}.csv", step + 1)),
                &swe::snapshot_csv(solver.states()),
            )?;
        }
    }
    write(&out.join("state_final.csv"), &swe::snapshot_csv(solver.states()))?;

    let mut timing = String::from("step,partition,compute_cycles,stall_cycles,drain_cycles,total_cycles,stall_fraction\n");
    for (step, parts) in solver.step_timings().iter().enumerate() {
        for (p, t) in parts.iter().enumerate() {
            timing.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                step, p, t.compute_cycles, t.stall_cycles, t.drain_cycles, t.total_cycles,
                t.stall_fraction
            ));
        }
    }
    write(&out.join("timing.csv"), &timing)?;
    if let Some(trace) = solver.trace() {
        write(&out.join("trace.log"), trace)?;
    }

    if let Some(reference) = reference {
        let identical = solver
            .states()
            .iter()
            .zip(&reference)
            .all(|(a, b)| {
                a.h.to_bits() == b.h.to_bits()
                    && a.hu.to_bits() == b.hu.to_bits()
                    && a.hv.to_bits() == b.hv.to_bits()
            });
        if identical {
            println!("oracle check: distributed state bitwise identical to the reference");
        } else {
            return Err(CliError::Runtime(
                "oracle check failed: distributed state differs from the reference".into(),
            ));
        }
    }
    println!(
        "solved {} steps on {} elements across {} partition(s)",
        steps,
        mesh.element_count(),
        k
    );
    Ok(())
}

pub fn swe_scaling(args: ScalingArgs) -> Result<(), CliError> {
    let file = load_file(&args.common, "swe-scaling")?;
    let cluster = resolve_cluster(&file.cluster, args.common.preset.as_deref())?;
    if args.common.dump_config {
        return dump_config("swe-scaling", &file, &cluster, &args.common);
    }
    let out = out_dir(&args.common, &file)?;

    let kind = args
        .kind
        .or(file.scaling.kind.clone())
        .unwrap_or_else(|| "weak".to_string());
    let k_list = match &args.k_list {
        Some(s) => parse_list(s)?,
        None => file
            .scaling
            .k_list
            .clone()
            .unwrap_or_else(|| match kind.as_str() {
                "strong" => vec![8, 16, 24, 32, 48, 64, 96, 128],
                _ => vec![1, 2, 4, 8, 16, 32, 48],
            }),
    };
    let mut cfg = match kind.as_str() {
        "weak" => ScalingConfig::weak(k_list),
        "strong" => ScalingConfig::strong(k_list),
        other => {
            return Err(CliError::Config(format!("unknown scaling kind `{other}` (weak|strong)")))
        }
    };
    if let Some(v) = args.elements_per_partition.or(file.scaling.elements_per_partition) {
        cfg.elements_per_partition = v;
    }
    if let Some(v) = args.mesh_elements.or(file.scaling.mesh_elements) {
        cfg.mesh_elements = v;
    }
    if let Some(v) = args.steps.or(file.scaling.steps) {
        cfg.steps = v;
    }
    if let Some(m) = file.scaling.method {
        cfg.method = m;
    }

    let rows = swe::run_scaling(&cfg, &cluster.as_preset())?;
    write(&out.join("scaling.csv"), &swe::scaling_csv(&rows))?;
    for r in &rows {
        println!(
            "k={:>3}  n_max={}  sim={:.3e} FLOP/s  model={:.3e} FLOP/s  eff={:.3}  stall={:.3}",
            r.k, r.n_max, r.sim_flops, r.model_flops, r.efficiency, r.stall_fraction
        );
    }
    Ok(())
}

pub fn model(args: ModelArgs) -> Result<(), CliError> {
    if let Some(pair) = &args.buffered_peak {
        let (mem_bw, link_bw) = (pair[0], pair[1]);
        if mem_bw <= 0.0 || link_bw <= 0.0 {
            return Err(CliError::Config("bandwidths must be positive".into()));
        }
        println!("{}", perfmodel::buffered_peak_throughput(mem_bw, link_bw));
        return Ok(());
    }
    let file = load_file(&args.common, "model-eval")?;
    let cluster = resolve_cluster(&file.cluster, args.common.preset.as_deref())?;
    if args.common.dump_config {
        return dump_config("model-eval", &file, &cluster, &args.common);
    }
    let out = out_dir(&args.common, &file)?;
    let sizes: Vec<u64> = match &args.sizes {
        Some(s) => s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse()
                    .map_err(|_| CliError::Config(format!("bad size `{t}`")))
            })
            .collect::<Result<_, _>>()?,
        None => file.model.sizes.clone().unwrap_or_else(beff::default_sizes),
    };
    if sizes.is_empty() {
        return Err(CliError::Config("size sweep must not be empty".into()));
    }
    let mut csv = String::from("size_bytes,mode,latency_s\n");
    for mode in TransferMode::ALL {
        for &size in &sizes {
            let l = perfmodel::transfer_latency(
                size,
                mode,
                &cluster.link,
                &cluster.scheduling,
                &cluster.memory,
            );
            csv.push_str(&format!("{size},{mode},{l}\n"));
        }
    }
    write(&out.join("model.csv"), &csv)?;
    Ok(())
}

pub fn mesh(cmd: MeshCmd) -> Result<(), CliError> {
    match cmd {
        MeshCmd::Generate { nx, ny, sea_side, out } => {
            if nx == 0 || ny == 0 {
                return Err(CliError::Config("nx and ny must be at least 1".into()));
            }
            let mesh = generate_rect_mesh(nx, ny, parse_sea_side(&sea_side)?);
            fs::write(&out, save_mesh(&mesh))?;
            println!(
                "wrote {out}: {} vertices, {} elements",
                mesh.vertices.len(),
                mesh.element_count()
            );
        }
        MeshCmd::Partition { mesh: path, k, method, out, bytes_per_element } => {
            let text = fs::read_to_string(&path)
                .map_err(|e| CliError::Config(format!("cannot read mesh {path}: {e}")))?;
            let mesh = load_mesh(&text)?;
            let p = partition(&mesh, k, parse_method(&method)?)?;
            let (stats, worst) = partition_stats(&p, &mesh, bytes_per_element);
            fs::write(&out, mesh::stats_csv(&stats))?;
            println!(
                "wrote {out}: {} parts, max neighbors {}, max send {}, largest halo {} B",
                k, worst.max_neighbors, worst.max_send_elements, worst.max_halo_bytes
            );
        }
        MeshCmd::Inspect { mesh: path } => {
            let text = fs::read_to_string(&path)
                .map_err(|e| CliError::Config(format!("cannot read mesh {path}: {e}")))?;
            let mesh = load_mesh(&text)?;
            let sea = mesh
                .edges
                .iter()
                .filter(|e| e.boundary == Some(mesh::BoundaryTag::Sea))
                .count();
            println!("vertices:        {}", mesh.vertices.len());
            println!("elements:        {}", mesh.element_count());
            println!("interior edges:  {}", mesh.interior_edge_count());
            println!("boundary edges:  {} ({} sea)", mesh.boundary_edge_count(), sea);
        }
    }
    Ok(())
}
