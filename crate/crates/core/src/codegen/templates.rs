//! Shipped module templates and `{{key}}` substitution.

use alloc::collections::BTreeMap;
use alloc::string::String;

use super::{ModuleKind, Target};

pub fn template(kind: ModuleKind, target: Target) -> Option<&'static str> {
    use ModuleKind::*;
    Some(match (target, kind) {
        (Target::Builtin, Model) => include_str!("../../templates/builtin/model.txt"),
        (Target::Builtin, PdeLoss) => include_str!("../../templates/builtin/pde_loss.txt"),
        (Target::Builtin, Preprocessing) => include_str!("../../templates/builtin/preprocessing.txt"),
        (Target::Builtin, TrainingLoop) => include_str!("../../templates/builtin/training_loop.txt"),
        (Target::Builtin, Validation) => include_str!("../../templates/builtin/validation.txt"),
        (Target::Builtin, Main) => include_str!("../../templates/builtin/main.txt"),
        (Target::ExternalRuntime, Model) => include_str!("../../templates/external/model.py"),
        (Target::ExternalRuntime, PdeLoss) => include_str!("../../templates/external/pde_loss.py"),
        (Target::ExternalRuntime, Preprocessing) => {
            include_str!("../../templates/external/preprocessing.py")
        }
        (Target::ExternalRuntime, TrainingLoop) => {
            include_str!("../../templates/external/training_loop.py")
        }
        (Target::ExternalRuntime, Validation) => include_str!("../../templates/external/validation.py"),
        (Target::ExternalRuntime, Main) => include_str!("../../templates/external/main.py"),
    })
}

/// Replaces every `{{key}}`; returns the first unbound key on failure.
pub fn render(text: &str, vars: &BTreeMap<&str, String>) -> Result<String, String> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let Some(end) = after.find("}}") else {
            out.push_str(&rest[start..]);
            return Ok(out);
        };
        let key = &after[..end];
        match vars.get(key) {
            Some(v) => out.push_str(v),
            None => return Err(String::from(key)),
        }
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    Ok(out)
}
