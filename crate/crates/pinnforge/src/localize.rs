//! Runtime diagnostic → repair directive, by first match over an ordered
//! signature table.

use std::sync::OnceLock;

use pinnforge_core::codegen::ModuleKind;
use pinnforge_core::feedback::{Directive, DirectiveTarget};
use regex::Regex;

pub struct Signature {
    pub id: &'static str,
    pub target: DirectiveTarget,
    pub pattern: Regex,
}

/// Assembly failures that name the offending module; checked before the table.
const NAMED_MODULE: &str = r"^(?:precondition failed: )?(?:interface check|missing kind|duplicate kind|mixed targets): (\w+)\b|^(\w+) source does not declare its interface";

const TABLE: &[(&str, &str, &str)] = &[
    ("shape", "model", r"(?i)shape mismatch|dimension mismatch|size mismatch|zero-sized layer"),
    (
        "residual-symbol",
        "pde_loss",
        r"(?i)undefined (symbol|derivative|residual)|residual mismatch|no residual block|residual weighting",
    ),
    (
        "io",
        "preprocessing",
        r"(?i)collocation path|no such file|file not found|i/o error|permission denied|\bpath error",
    ),
    (
        "non-finite",
        "training_loop",
        r"(?i)non-finite loss|exploding loss|\bnan\b|optimizer fault|invalid trainer config",
    ),
    ("metric", "validation", r"(?i)metric computation fault"),
    ("entry-point", "main", r"(?i)entry point|invalid argument|missing argument|^usage:"),
    ("unsupported-family", "PINN-agent", r"(?i)unsupported PDE family"),
    ("unparseable-residual", "PDE-agent", r"(?i)unparseable residual"),
];

pub fn signatures() -> &'static [Signature] {
    static SIGS: OnceLock<Vec<Signature>> = OnceLock::new();
    SIGS.get_or_init(|| {
        TABLE
            .iter()
            .map(|(id, target, pattern)| Signature {
                id,
                target: DirectiveTarget::try_from(target.to_string()).expect("table targets are valid"),
                pattern: Regex::new(pattern).expect("table patterns compile"),
            })
            .collect()
    })
}

fn named_module() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(NAMED_MODULE).expect("pattern compiles"))
}

/// Ids of every table signature matching `text`, in table order.
pub fn matching_signatures(text: &str) -> Vec<&'static str> {
    signatures()
        .iter()
        .filter(|s| s.pattern.is_match(text))
        .map(|s| s.id)
        .collect()
}

/// Total: every input yields exactly one directive; unmatched text goes to
/// `main` as "unclassified".
pub fn localize_error(text: &str) -> Directive {
    let reason = text.trim().to_string();
    if let Some(c) = named_module().captures(text.trim()) {
        let name = c.get(1).or_else(|| c.get(2)).map(|m| m.as_str()).unwrap_or_default();
        if let Some(kind) = ModuleKind::parse(name) {
            return Directive {
                target: DirectiveTarget::Module(kind),
                reason,
                signature: "assembly".into(),
            };
        }
    }
    match signatures().iter().find(|s| s.pattern.is_match(text)) {
        Some(s) => Directive {
            target: s.target,
            reason,
            signature: s.id.into(),
        },
        None => Directive {
            target: DirectiveTarget::Module(ModuleKind::Main),
            reason: "unclassified".into(),
            signature: "unclassified".into(),
        },
    }
}
