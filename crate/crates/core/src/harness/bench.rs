//! Synthetic benchmark generator.
//!
//! Applications are layered fork-join pipelines: a source, a sequence of
//! stages that are either one task or a parallel section of several, and a
//! sink. The presets reproduce only the size and platform shape of the
//! decoder workloads they are named after; their costs are synthetic.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{AppGraph, Channel, Cycles, Platform, ProblemFile, Processor, Task};

pub const IO_TYPE: &str = "io";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlatformParams {
    /// Processors available to free tasks.
    pub processors: usize,
    /// Distinct processor types among them, assigned round-robin.
    pub types: usize,
    /// Adds a reserved processor of type `io` that runs only pinned tasks.
    pub io_processor: bool,
    pub bus_word_cycles: Cycles,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppParams {
    pub name: String,
    pub tasks: usize,
    /// 0 pins nothing, 1 pins the source, 2 pins source and sink to the IO
    /// processor.
    pub pinned_io: usize,
    /// Chance that a middle stage is a parallel section.
    pub fork_join: f64,
    pub max_width: usize,
    /// Base compute cycles per firing, inclusive range.
    pub compute: [Cycles; 2],
    /// Per-type speed factor in percent of the base cost, inclusive range.
    pub type_factor_pct: [u64; 2],
    pub cost_local: [Cycles; 2],
    pub cost_shared: [Cycles; 2],
    pub token_size: [u64; 2],
    pub capacity: u64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeParams {
    pub platform: PlatformParams,
    pub apps: Vec<AppParams>,
}

pub const PRESETS: [&str; 4] = ["mp3like", "mjpeg8", "sobel6", "tiny8x3"];

fn decoder_platform() -> PlatformParams {
    PlatformParams {
        processors: 5,
        types: 2,
        io_processor: true,
        bus_word_cycles: 4,
    }
}

fn decoder_app(name: &str, tasks: usize, fork_join: f64, seed: u64) -> AppParams {
    AppParams {
        name: name.to_string(),
        tasks,
        pinned_io: 2,
        fork_join,
        max_width: 3,
        compute: [2_000, 40_000],
        type_factor_pct: [40, 250],
        cost_local: [20, 200],
        cost_shared: [400, 4_000],
        token_size: [16, 256],
        capacity: 2,
        seed,
    }
}

/// Parameters of a bundled preset; `None` for an unknown name.
pub fn preset_params(name: &str) -> Option<ShapeParams> {
    let decoder = |app| ShapeParams {
        platform: decoder_platform(),
        apps: vec![app],
    };
    Some(match name {
        "mp3like" => decoder(decoder_app("mp3like", 27, 0.5, 0x3d3)),
        "mjpeg8" => decoder(decoder_app("mjpeg8", 8, 0.4, 0x1b8)),
        "sobel6" => decoder(decoder_app("sobel6", 6, 0.6, 0x50b)),
        "tiny8x3" => ShapeParams {
            platform: PlatformParams {
                processors: 3,
                types: 3,
                io_processor: false,
                bus_word_cycles: 2,
            },
            apps: vec![AppParams {
                pinned_io: 0,
                ..decoder_app("tiny8x3", 8, 0.5, 0x8)
            }],
        },
        _ => return None,
    })
}

/// Generates a preset, or several presets joined with `+` onto their common
/// platform.
pub fn preset(spec: &str) -> Result<ProblemFile> {
    let mut merged: Option<ShapeParams> = None;
    for name in spec.split('+') {
        let p = preset_params(name.trim())
            .ok_or_else(|| Error::BadShape(format!("unknown preset `{name}` (known: {})", PRESETS.join(", "))))?;
        match &mut merged {
            None => merged = Some(p),
            Some(m) => {
                if m.platform != p.platform {
                    return Err(Error::BadShape(format!("preset `{name}` uses a different platform")));
                }
                m.apps.extend(p.apps);
            }
        }
    }
    gen_benchmark(&merged.expect("split yields at least one name"))
}

pub fn gen_benchmark(shape: &ShapeParams) -> Result<ProblemFile> {
    check_shape(shape)?;
    let platform = gen_platform(&shape.platform);
    let types: Vec<String> = platform.types().map(String::from).collect();
    let apps = shape.apps.iter().map(|a| gen_app(a, &types)).collect();
    Ok(ProblemFile::new(apps, platform))
}

fn check_shape(shape: &ShapeParams) -> Result<()> {
    let bad = |m: String| Err(Error::BadShape(m));
    let pf = &shape.platform;
    if pf.processors == 0 {
        return bad("need at least one processor".into());
    }
    if pf.types == 0 || pf.types > pf.processors {
        return bad(format!("types must be in 1..={}, got {}", pf.processors, pf.types));
    }
    if shape.apps.is_empty() {
        return bad("need at least one application".into());
    }
    for a in &shape.apps {
        let name = &a.name;
        if a.tasks == 0 {
            return bad(format!("{name}: need at least one task"));
        }
        if a.pinned_io > 2 || a.pinned_io > a.tasks {
            return bad(format!("{name}: pinned_io must be at most min(2, tasks)"));
        }
        if a.pinned_io > 0 && !pf.io_processor {
            return bad(format!("{name}: pinned tasks need an IO processor"));
        }
        if !(0.0..=1.0).contains(&a.fork_join) {
            return bad(format!("{name}: fork_join must be in [0, 1]"));
        }
        if a.fork_join > 0.0 && a.max_width < 2 {
            return bad(format!("{name}: max_width must be at least 2 when fork_join > 0"));
        }
        for (what, r) in [
            ("compute", a.compute),
            ("type_factor_pct", a.type_factor_pct),
            ("cost_local", a.cost_local),
            ("cost_shared", a.cost_shared),
            ("token_size", a.token_size),
        ] {
            if r[0] > r[1] {
                return bad(format!("{name}: {what} range is empty"));
            }
        }
        if a.compute[0] == 0 || a.type_factor_pct[0] == 0 || a.token_size[0] == 0 {
            return bad(format!(
                "{name}: compute, type_factor_pct and token_size must be positive"
            ));
        }
        if a.capacity == 0 {
            return bad(format!("{name}: capacity must be positive"));
        }
    }
    Ok(())
}

fn gen_platform(p: &PlatformParams) -> Platform {
    let mut processors: Vec<Processor> = (0..p.processors)
        .map(|i| Processor {
            id: format!("pe{i}"),
            kind: format!("type{}", i % p.types),
            reserved: false,
        })
        .collect();
    if p.io_processor {
        processors.push(Processor {
            id: "io".into(),
            kind: IO_TYPE.into(),
            reserved: true,
        });
    }
    Platform {
        processors,
        bus_word_cycles: p.bus_word_cycles,
        arbitration: Default::default(),
    }
}

fn draw(rng: &mut ChaCha8Rng, r: [u64; 2]) -> u64 {
    rng.gen_range(r[0]..=r[1])
}

fn gen_app(a: &AppParams, types: &[String]) -> AppGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);

    // layer widths: source, middle stages, sink
    let mut layers = Vec::new();
    if a.tasks == 1 {
        layers.push(1);
    } else {
        layers.push(1);
        let mut left = a.tasks - 2;
        while left > 0 {
            let w = if left >= 2 && rng.gen::<f64>() < a.fork_join {
                rng.gen_range(2..=a.max_width.min(left))
            } else {
                1
            };
            layers.push(w);
            left -= w;
        }
        layers.push(1);
    }

    let mut names: Vec<Vec<String>> = Vec::new();
    let mut tasks = Vec::new();
    let mut k = 0;
    for &w in &layers {
        let mut layer = Vec::new();
        for _ in 0..w {
            let id = format!("t{k:02}");
            k += 1;
            let base = draw(&mut rng, a.compute);
            let mut cost = BTreeMap::new();
            for ty in types {
                let c = if ty == IO_TYPE {
                    base
                } else {
                    (base * draw(&mut rng, a.type_factor_pct) / 100).max(1)
                };
                cost.insert(ty.clone(), c);
            }
            tasks.push(Task {
                id: id.clone(),
                compute_cost: cost,
                pinned_to: None,
                firings_per_frame: 1,
            });
            layer.push(id);
        }
        names.push(layer);
    }
    if a.pinned_io >= 1 {
        tasks[0].pinned_to = Some("io".into());
    }
    if a.pinned_io >= 2 {
        tasks.last_mut().expect("tasks").pinned_to = Some("io".into());
    }

    let mut channels = Vec::new();
    for pair in names.windows(2) {
        let (from, to) = (&pair[0], &pair[1]);
        let mut edges = Vec::new();
        if from.len() == 1 || to.len() == 1 {
            for s in from {
                for d in to {
                    edges.push((s, d));
                }
            }
        } else {
            for (j, s) in from.iter().enumerate() {
                edges.push((s, &to[j % to.len()]));
            }
            for (j, d) in to.iter().enumerate().skip(from.len()) {
                edges.push((&from[j % from.len()], d));
            }
        }
        for (s, d) in edges {
            let local = draw(&mut rng, a.cost_local);
            let shared = draw(&mut rng, a.cost_shared).max(local);
            channels.push(Channel {
                id: format!("{s}_{d}"),
                src: s.clone(),
                dst: d.clone(),
                tokens_per_firing: 1,
                consume_per_firing: None,
                token_size: draw(&mut rng, a.token_size),
                capacity: a.capacity,
                initial_tokens: 0,
                cost_local: local,
                cost_shared: shared,
            });
        }
    }
    AppGraph {
        name: a.name.clone(),
        tasks,
        channels,
    }
}
