//! Prompt templates. The defaults ship in `templates/`; a run may point at
//! a directory of edited copies with the same file names.

use std::path::Path;

use crate::error::{ArenaError, Result};
use crate::types::DomainTag;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Templates {
    pub meta_prompt: String,
    pub generate_from_meta: String,
    pub generate_direct: String,
    pub amplify: String,
    pub solve: String,
    pub verify: String,
    pub format_reminder: String,
}

const FILES: [&str; 7] = [
    "meta_prompt.txt",
    "generate_from_meta.txt",
    "generate_direct.txt",
    "amplify.txt",
    "solve.txt",
    "verify.txt",
    "format_reminder.txt",
];

impl Default for Templates {
    fn default() -> Self {
        Templates {
            meta_prompt: include_str!("../templates/meta_prompt.txt").into(),
            generate_from_meta: include_str!("../templates/generate_from_meta.txt").into(),
            generate_direct: include_str!("../templates/generate_direct.txt").into(),
            amplify: include_str!("../templates/amplify.txt").into(),
            solve: include_str!("../templates/solve.txt").into(),
            verify: include_str!("../templates/verify.txt").into(),
            format_reminder: include_str!("../templates/format_reminder.txt").into(),
        }
    }
}

impl Templates {
    /// Reads every template from `dir`; all seven files must exist.
    pub fn load(dir: &Path) -> Result<Self> {
        let read = |name: &str| {
            std::fs::read_to_string(dir.join(name))
                .map_err(|e| ArenaError::Config(format!("template {}: {e}", dir.join(name).display())))
        };
        let mut texts = FILES.iter().map(|f| read(f)).collect::<Result<Vec<String>>>()?.into_iter();
        let mut next = || texts.next().expect("seven templates");
        Ok(Templates {
            meta_prompt: next(),
            generate_from_meta: next(),
            generate_direct: next(),
            amplify: next(),
            solve: next(),
            verify: next(),
            format_reminder: next(),
        })
    }
}

/// Substitutes `{key}` placeholders. Unknown placeholders are left as is.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    vars.iter()
        .fold(template.to_string(), |s, (k, v)| s.replace(&format!("{{{k}}}"), v))
}

/// If `line` is `NAME: value` (any case, optional `*`/`#` decoration),
/// returns the value.
pub(crate) fn field<'a>(line: &'a str, name: &str) -> Option<&'a str> {
    let line = line.trim().trim_start_matches(['*', '#', ' ']);
    let (key, value) = line.split_once(':')?;
    let key = key.trim().trim_end_matches('*');
    key.eq_ignore_ascii_case(name)
        .then(|| value.trim().trim_start_matches('*').trim())
}

/// Value of the last `NAME:` line in `text`.
pub(crate) fn last_field<'a>(text: &'a str, name: &str) -> Option<&'a str> {
    text.lines().rev().find_map(|l| field(l, name))
}

pub(crate) fn domain_vars(domain: &DomainTag) -> [(&'static str, &str); 2] {
    [("domain_area", domain.broad_area.label()), ("domain_subfield", &domain.subfield)]
}
