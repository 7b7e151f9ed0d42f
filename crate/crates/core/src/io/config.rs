//! Run configuration: `key = value` lines grouped under `[section]` headers.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::estimation::{EstimationOptions, HStructure};
use crate::io::loader::PanelOptions;
use crate::mc::{McConfig, Sampler};
use crate::models::ModelVariant;

/// Minimum number of rows in the first estimation window.
pub const MIN_WINDOW: usize = 250;

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub variant: ModelVariant,
    /// Starting parameters (JSON); the built-in reference set when absent.
    pub params: Option<PathBuf>,
    pub quotes: Option<PathBuf>,
    pub fixings: Option<PathBuf>,
    pub calendar: Option<PathBuf>,
    pub benchmark: Option<PathBuf>,
    pub min_window: usize,
    /// Rows between re-estimations once the first window is filled.
    pub reestimate_every: usize,
    pub h_structure: HStructure,
    pub init_h_sd: f64,
    pub estimation: EstimationOptions,
    pub panel: PanelOptions,
    pub mc: McConfig,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            variant: ModelVariant::Afns3,
            params: None,
            quotes: None,
            fixings: None,
            calendar: None,
            benchmark: None,
            min_window: MIN_WINDOW,
            reestimate_every: 1,
            h_structure: HStructure::PerKind,
            init_h_sd: 1e-4,
            estimation: EstimationOptions::default(),
            panel: PanelOptions::default(),
            mc: McConfig::default(),
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Raw sections: section -> key -> (value, line).
type Sections = BTreeMap<String, BTreeMap<String, (String, usize)>>;

fn parse_sections(text: &str) -> Result<Sections> {
    let mut out: Sections = BTreeMap::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or(Error::Parse {
                line: line_no,
                msg: format!("unterminated section header `{line}`"),
            })?;
            section = name.trim().to_ascii_lowercase();
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(Error::Parse {
            line: line_no,
            msg: format!("expected `key = value`, got `{line}`"),
        })?;
        let key = k.trim().to_ascii_lowercase();
        if out.entry(section.clone()).or_default().insert(key.clone(), (v.trim().to_string(), line_no)).is_some() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("duplicate key `{key}` in [{section}]"),
            });
        }
    }
    Ok(out)
}

struct Reader {
    sections: Sections,
    base: PathBuf,
}

impl Reader {
    fn take(&mut self, section: &str, key: &str) -> Option<(String, usize)> {
        self.sections.get_mut(section)?.remove(key)
    }

    fn parse<T: std::str::FromStr>(&mut self, section: &str, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.take(section, key) {
            None => Ok(None),
            Some((v, line)) => v.parse().map(Some).map_err(|e| Error::Parse {
                line,
                msg: format!("[{section}] {key}: {e}"),
            }),
        }
    }

    fn path(&mut self, section: &str, key: &str) -> Option<PathBuf> {
        self.take(section, key).map(|(v, _)| {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                self.base.join(p)
            }
        })
    }
}

impl RunConfig {
    /// Parses configuration text; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut r = Reader {
            sections: parse_sections(text)?,
            base: base.to_path_buf(),
        };
        let mut c = RunConfig::default();
        if let Some(v) = r.parse("model", "variant")? {
            c.variant = v;
        }
        c.params = r.path("model", "params");
        c.quotes = r.path("data", "quotes");
        c.fixings = r.path("data", "fixings");
        c.calendar = r.path("data", "calendar");
        c.benchmark = r.path("data", "benchmark");

        if let Some(v) = r.parse("estimation", "min_window")? {
            c.min_window = v;
        }
        let allow_short: bool = r.parse("estimation", "allow_short_window")?.unwrap_or(false);
        if c.min_window < MIN_WINDOW && !allow_short {
            return Err(Error::InvalidParams(format!(
                "min_window {} is below {MIN_WINDOW}; set allow_short_window = true to override",
                c.min_window
            )));
        }
        if let Some(v) = r.parse("estimation", "reestimate_every")? {
            c.reestimate_every = v;
        }
        if let Some((v, line)) = r.take("estimation", "h_structure") {
            c.h_structure = match v.as_str() {
                "per_kind" => HStructure::PerKind,
                "per_slot" => HStructure::PerSlot,
                other => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("h_structure must be per_kind or per_slot, got `{other}`"),
                    })
                }
            };
        }
        if let Some(v) = r.parse("estimation", "init_h_sd")? {
            c.init_h_sd = v;
        }
        if let Some(v) = r.parse("estimation", "ftol")? {
            c.estimation.ftol = v;
        }
        if let Some(v) = r.parse("estimation", "max_evals")? {
            c.estimation.max_evals = v;
        }
        if let Some(v) = r.parse("estimation", "restarts")? {
            c.estimation.restarts = v;
        }
        if let Some(v) = r.parse("estimation", "seed")? {
            c.estimation.seed = v;
        }

        if let Some(v) = r.parse("universe", "monthly")? {
            c.panel.n_monthly = v;
        }
        if let Some(v) = r.parse("universe", "quarterly")? {
            c.panel.n_quarterly = v;
        }
        if let Some(v) = r.parse("universe", "dt")? {
            c.panel.dt = v;
        }

        if let Some(v) = r.parse("mc", "paths")? {
            c.mc.n_paths = v;
        }
        if let Some(v) = r.parse("mc", "steps_per_day")? {
            let n: f64 = v;
            c.mc.dt = 1.0 / (360.0 * n);
        }
        if let Some(v) = r.parse("mc", "seed")? {
            c.mc.seed = v;
        }
        if let Some(v) = r.parse("mc", "antithetic")? {
            c.mc.antithetic = v;
        }
        if let Some((v, line)) = r.take("mc", "sampler") {
            c.mc.sampler = match v.as_str() {
                "auto" => Sampler::Auto,
                "exact" => Sampler::Exact,
                "euler" => Sampler::Euler,
                other => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("sampler must be auto, exact or euler, got `{other}`"),
                    })
                }
            };
        }
        if let Some(p) = r.path("output", "dir") {
            c.out_dir = p;
        }

        // Anything left over is a typo or an unsupported option.
        for (section, keys) in &r.sections {
            if let Some((key, (_, line))) = keys.iter().next() {
                return Err(Error::Parse {
                    line: *line,
                    msg: format!("unknown option `{key}` in [{section}]"),
                });
            }
        }
        c.mc.validate()?;
        Ok(c)
    }

    /// Reads a config file and checks that every referenced input exists.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let c = Self::parse(&text, base)?;
        for p in [&c.params, &c.quotes, &c.fixings, &c.calendar, &c.benchmark].into_iter().flatten() {
            if !p.exists() {
                return Err(Error::Data(format!("configured path {} does not exist", p.display())));
            }
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = "
# sample
[model]
variant = shadow_afns3
[data]
quotes = q.csv
fixings = /abs/f.csv
[estimation]
min_window = 300
h_structure = per_slot
restarts = 2
[mc]
paths = 2000
steps_per_day = 5
seed = 9
[output]
dir = results
";

    #[test]
    fn parses_sections() {
        let c = RunConfig::parse(TEXT, Path::new("/base")).unwrap();
        assert_eq!(c.variant, ModelVariant::ShadowAfns3);
        assert_eq!(c.quotes, Some(PathBuf::from("/base/q.csv")));
        assert_eq!(c.fixings, Some(PathBuf::from("/abs/f.csv")));
        assert_eq!(c.min_window, 300);
        assert_eq!(c.h_structure, HStructure::PerSlot);
        assert_eq!(c.estimation.restarts, 2);
        assert_eq!(c.mc.n_paths, 2000);
        assert!((c.mc.dt - 1.0 / 1800.0).abs() < 1e-18);
        assert_eq!(c.out_dir, PathBuf::from("/base/results"));
        assert_eq!(c.panel.n_monthly, 7);
    }

    #[test]
    fn rejects_short_windows_and_unknown_keys() {
        assert!(RunConfig::parse("[estimation]\nmin_window = 100\n", Path::new(".")).is_err());
        let ok = RunConfig::parse("[estimation]\nmin_window = 100\nallow_short_window = true\n", Path::new(".")).unwrap();
        assert_eq!(ok.min_window, 100);
        match RunConfig::parse("[model]\nvariant = afns3\ncolour = red\n", Path::new(".")) {
            Err(Error::Parse { line: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(RunConfig::parse("[model\n", Path::new(".")), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn missing_paths_fail_at_load() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.ini");
        std::fs::write(&cfg, "[data]\nquotes = nope.csv\n").unwrap();
        assert!(matches!(RunConfig::load(&cfg), Err(Error::Data(_))));
    }
}
