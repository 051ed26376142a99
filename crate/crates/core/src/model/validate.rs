use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use super::schema::{ProblemFile, FORMAT_VERSION};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub code: &'static str,
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    pub fn error(code: &'static str, message: impl Into<String>) -> Self {
        Diagnostic {
            code,
            severity: Severity::Error,
            message: message.into(),
        }
    }

    pub fn warning(code: &'static str, message: impl Into<String>) -> Self {
        Diagnostic {
            code,
            severity: Severity::Warning,
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}[{}]: {}", self.code, self.message)
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(Diagnostic::is_error)
}

/// Checks every structural invariant of a problem description. Returns one
/// diagnostic per violation, in a deterministic order; an empty list means
/// the problem is well formed.
pub fn validate(file: &ProblemFile) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if file.format != FORMAT_VERSION {
        out.push(Diagnostic::error(
            "E_UNSUPPORTED_FORMAT",
            format!("format {} is not supported (expected {FORMAT_VERSION})", file.format),
        ));
    }

    let platform = &file.platform;
    if platform.processors.is_empty() {
        out.push(Diagnostic::error("E_NO_PROCESSORS", "platform has no processors"));
    }
    let mut proc_ids = HashSet::new();
    for p in &platform.processors {
        if !proc_ids.insert(p.id.as_str()) {
            out.push(Diagnostic::error(
                "E_DUPLICATE_PROCESSOR",
                format!("processor id `{}` is used more than once", p.id),
            ));
        }
    }
    let types: Vec<&str> = platform.types().collect();
    let has_free_proc = platform.processors.iter().any(|p| !p.reserved);

    if file.apps.is_empty() {
        out.push(Diagnostic::error("E_EMPTY_APPS", "problem has no applications"));
    }
    let mut app_names = HashSet::new();
    for app in &file.apps {
        if !app_names.insert(app.name.as_str()) {
            out.push(Diagnostic::error(
                "E_DUPLICATE_APP_NAME",
                format!("application name `{}` is used more than once", app.name),
            ));
        }
        if app.tasks.is_empty() {
            out.push(Diagnostic::error(
                "E_NO_TASKS",
                format!("application `{}` has no tasks", app.name),
            ));
        }

        let mut firings: HashMap<&str, u64> = HashMap::new();
        for t in &app.tasks {
            let name = format!("{}/{}", app.name, t.id);
            if firings.insert(t.id.as_str(), t.firings_per_frame).is_some() {
                out.push(Diagnostic::error(
                    "E_DUPLICATE_TASK",
                    format!("task id `{name}` is used more than once"),
                ));
            }
            if t.firings_per_frame == 0 {
                out.push(Diagnostic::error(
                    "E_BAD_FIRINGS",
                    format!("task `{name}` must fire at least once per frame"),
                ));
            }
            for ty in &types {
                match t.compute_cost.get(*ty) {
                    None => out.push(Diagnostic::error(
                        "E_COST_INCOMPLETE",
                        format!("task `{name}` has no compute cost for processor type `{ty}`"),
                    )),
                    Some(0) => out.push(Diagnostic::error(
                        "E_COST_NONPOSITIVE",
                        format!("task `{name}` has a zero compute cost on type `{ty}`"),
                    )),
                    Some(_) => {}
                }
            }
            match &t.pinned_to {
                Some(pin) if platform.index_of(pin).is_none() => out.push(Diagnostic::error(
                    "E_PIN_UNKNOWN_PROCESSOR",
                    format!("task `{name}` is pinned to unknown processor `{pin}`"),
                )),
                None if !has_free_proc && !platform.processors.is_empty() => out.push(Diagnostic::error(
                    "E_NO_FREE_PROCESSOR",
                    format!("task `{name}` is not pinned but every processor is reserved"),
                )),
                _ => {}
            }
        }

        let mut channel_ids = HashSet::new();
        for c in &app.channels {
            let name = format!("{}/{}", app.name, c.id);
            if !channel_ids.insert(c.id.as_str()) {
                out.push(Diagnostic::error(
                    "E_DUPLICATE_CHANNEL",
                    format!("channel id `{name}` is used more than once"),
                ));
            }
            let src = firings.get(c.src.as_str()).copied();
            let dst = firings.get(c.dst.as_str()).copied();
            for (end, found) in [(&c.src, src), (&c.dst, dst)] {
                if found.is_none() {
                    out.push(Diagnostic::error(
                        "E_CHANNEL_DANGLING",
                        format!("channel `{name}` names missing task `{end}`"),
                    ));
                }
            }
            if c.src == c.dst && !file.options.allow_self_loops {
                out.push(Diagnostic::error(
                    "E_SELF_LOOP",
                    format!("channel `{name}` connects task `{}` to itself", c.src),
                ));
            }
            if c.tokens_per_firing == 0 || c.consume() == 0 {
                out.push(Diagnostic::error(
                    "E_BAD_RATE",
                    format!("channel `{name}` must move at least one token per firing"),
                ));
            }
            if c.capacity == 0 {
                out.push(Diagnostic::error(
                    "E_BAD_CAPACITY",
                    format!("channel `{name}` has zero capacity"),
                ));
            } else if c.capacity < c.tokens_per_firing.max(c.consume()) {
                out.push(Diagnostic::error(
                    "E_CAPACITY_TOO_SMALL",
                    format!("channel `{name}` capacity {} is below its per-firing rate", c.capacity),
                ));
            }
            if c.initial_tokens > c.capacity {
                out.push(Diagnostic::error(
                    "E_INITIAL_TOKENS_EXCEED_CAPACITY",
                    format!(
                        "channel `{name}` starts with {} tokens but holds {}",
                        c.initial_tokens, c.capacity
                    ),
                ));
            }
            if let (Some(fs), Some(fd)) = (src, dst) {
                if fs * c.tokens_per_firing != fd * c.consume() {
                    out.push(Diagnostic::error(
                        "E_RATE_MISMATCH",
                        format!(
                            "channel `{name}`: producer writes {} tokens per frame, consumer reads {}",
                            fs * c.tokens_per_firing,
                            fd * c.consume()
                        ),
                    ));
                }
            }
            if c.cost_local > c.cost_shared {
                out.push(Diagnostic::warning(
                    "W_COST_LOCAL_EXCEEDS_SHARED",
                    format!(
                        "channel `{name}`: local cost {} is above shared cost {}",
                        c.cost_local, c.cost_shared
                    ),
                ));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::testutil::{pipeline2, single_task};

    fn codes(file: &ProblemFile) -> Vec<&'static str> {
        validate(file).into_iter().map(|d| d.code).collect()
    }

    #[test]
    fn well_formed_pipeline_has_no_diagnostics() {
        assert!(validate(&pipeline2(100, 100, 2, 10, 2)).is_empty());
    }

    #[test]
    fn dangling_channel() {
        let mut f = pipeline2(100, 100, 2, 10, 2);
        f.apps[0].channels[0].dst = "ghost".into();
        assert_eq!(codes(&f), vec!["E_CHANNEL_DANGLING"]);
    }

    #[test]
    fn incomplete_cost() {
        let mut f = pipeline2(100, 100, 2, 10, 2);
        f.platform.processors[1].kind = "dsp".into();
        // both tasks only know "risc"
        assert_eq!(codes(&f), vec!["E_COST_INCOMPLETE", "E_COST_INCOMPLETE"]);
    }

    #[test]
    fn self_loop_rejected_unless_enabled() {
        let mut f = pipeline2(100, 100, 2, 10, 2);
        f.apps[0].channels[0].dst = "a".into();
        assert_eq!(codes(&f), vec!["E_SELF_LOOP"]);
        f.options.allow_self_loops = true;
        assert!(codes(&f).is_empty());
    }

    #[test]
    fn local_cost_above_shared_is_a_warning() {
        let f = pipeline2(100, 100, 20, 10, 2);
        let d = validate(&f);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].code, "W_COST_LOCAL_EXCEEDS_SHARED");
        assert!(!has_errors(&d));
    }

    #[test]
    fn pin_to_unknown_processor() {
        let mut f = single_task(100, 1);
        f.apps[0].tasks[0].pinned_to = Some("io9".into());
        assert_eq!(codes(&f), vec!["E_PIN_UNKNOWN_PROCESSOR"]);
    }

    #[test]
    fn rate_mismatch_and_capacity() {
        let mut f = pipeline2(100, 100, 2, 10, 2);
        f.apps[0].tasks[0].firings_per_frame = 2;
        assert_eq!(codes(&f), vec!["E_RATE_MISMATCH"]);
        f.apps[0].channels[0].consume_per_firing = Some(2);
        assert!(codes(&f).is_empty());
        f.apps[0].channels[0].capacity = 1;
        assert_eq!(codes(&f), vec!["E_CAPACITY_TOO_SMALL"]);
    }

    #[test]
    fn duplicates_and_empties() {
        let mut f = pipeline2(100, 100, 2, 10, 2);
        f.apps.push(f.apps[0].clone());
        f.platform.processors.push(f.platform.processors[0].clone());
        let c = codes(&f);
        assert!(c.contains(&"E_DUPLICATE_APP_NAME"));
        assert!(c.contains(&"E_DUPLICATE_PROCESSOR"));

        let mut f = single_task(100, 1);
        f.apps[0].tasks.clear();
        assert_eq!(codes(&f), vec!["E_NO_TASKS"]);
        f.apps.clear();
        assert_eq!(codes(&f), vec!["E_EMPTY_APPS"]);
    }

    #[test]
    fn all_reserved_processors() {
        let mut f = single_task(100, 1);
        f.platform.processors[0].reserved = true;
        assert_eq!(codes(&f), vec!["E_NO_FREE_PROCESSOR"]);
        f.apps[0].tasks[0].pinned_to = Some("pe0".into());
        assert!(codes(&f).is_empty());
    }
}
