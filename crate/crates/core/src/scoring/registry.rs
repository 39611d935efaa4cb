use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use super::{
    ConstantScorer, LexicalScorer, LookupScorer, RemoteConfig, RemoteScorer, ScoreError, Scorer,
    SCORER_URL_ENV,
};

/// Settings shared by every factory; only the remote scorer uses them today.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorerOptions {
    pub timeout: Duration,
    pub retries: u32,
    pub backoff: Duration,
}

impl Default for ScorerOptions {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(30),
            retries: 2,
            backoff: Duration::from_millis(200),
        }
    }
}

/// Builds a scorer from the argument after `name:` (if any).
pub type ScorerFactory =
    Box<dyn Fn(Option<&str>, &ScorerOptions) -> Result<Arc<dyn Scorer>, ScoreError> + Send + Sync>;

/// Scorers keyed by name and selected with specs like `lexical` or `lookup:<path>`.
pub struct ScorerRegistry {
    factories: BTreeMap<String, ScorerFactory>,
    pub options: ScorerOptions,
}

impl Default for ScorerRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl ScorerRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
            options: ScorerOptions::default(),
        }
    }

    /// Registry holding `lexical`, `lookup`, `remote` and `constant`.
    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register(
            "lexical",
            Box::new(|arg, _| match arg {
                None => Ok(Arc::new(LexicalScorer) as Arc<dyn Scorer>),
                Some(a) => Err(invalid("lexical", a, "lexical takes no argument")),
            }),
        );
        reg.register(
            "lookup",
            Box::new(|arg, _| {
                let path = arg
                    .filter(|a| !a.is_empty())
                    .ok_or_else(|| invalid("lookup", "", "expected lookup:<path>"))?;
                Ok(Arc::new(LookupScorer::from_path(Path::new(path))?) as Arc<dyn Scorer>)
            }),
        );
        reg.register(
            "remote",
            Box::new(|arg, opts| {
                let url = match arg.filter(|a| !a.is_empty()) {
                    Some(url) => url.to_string(),
                    None => std::env::var(SCORER_URL_ENV).map_err(|_| {
                        invalid(
                            "remote",
                            "",
                            &format!("no URL given and {SCORER_URL_ENV} is unset"),
                        )
                    })?,
                };
                let mut cfg = RemoteConfig::new(url);
                cfg.timeout = opts.timeout;
                cfg.retries = opts.retries;
                cfg.backoff = opts.backoff;
                Ok(Arc::new(RemoteScorer::new(cfg)) as Arc<dyn Scorer>)
            }),
        );
        reg.register(
            "constant",
            Box::new(|arg, _| {
                let value = arg.unwrap_or("0");
                let v: f64 = value
                    .parse()
                    .map_err(|_| invalid("constant", value, "expected constant:<number>"))?;
                Ok(Arc::new(ConstantScorer(v)) as Arc<dyn Scorer>)
            }),
        );
        reg
    }

    /// Adds or replaces the factory for `name`.
    pub fn register(&mut self, name: &str, factory: ScorerFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    /// Resolves a spec of the form `name` or `name:argument`.
    pub fn build(&self, spec: &str) -> Result<Arc<dyn Scorer>, ScoreError> {
        let (name, arg) = match spec.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (spec, None),
        };
        let factory = self
            .factories
            .get(name)
            .ok_or_else(|| ScoreError::UnknownScorer(name.to_string()))?;
        factory(arg, &self.options)
    }
}

fn invalid(name: &str, arg: &str, reason: &str) -> ScoreError {
    let spec = if arg.is_empty() {
        name.to_string()
    } else {
        format!("{name}:{arg}")
    };
    ScoreError::InvalidSpec {
        spec,
        reason: reason.to_string(),
    }
}
