//! The sentence grammar accepted by the rule-based frontend.
//!
//! A sentence is split into fragments on `;`, `, and`, `,` and `and also`;
//! each fragment must match one production below. Fragments joined by a bare
//! `and` are split only when both halves parse on their own.

use std::fmt::Write as _;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProductionKind {
    PlacementRequire,
    PlacementForbid,
    RoutingVia,
    RoutingAvoid,
    RoutingFanIn,
    RoutingBetweenVia,
    RoutingBetweenAvoid,
}

impl ProductionKind {
    pub fn is_placement(self) -> bool {
        matches!(self, Self::PlacementRequire | Self::PlacementForbid)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Production {
    pub name: &'static str,
    pub kind: ProductionKind,
    pub pattern: &'static str,
    pub example: &'static str,
}

/// A label family the grammar can talk about.
#[derive(Debug, Clone, Serialize)]
pub struct LabelFamily {
    pub name: &'static str,
    pub entity: &'static str,
    pub keys: &'static [&'static str],
    pub phrases: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct Grammar {
    pub separators: &'static [&'static str],
    pub lead_ins: &'static str,
    pub productions: Vec<Production>,
    pub families: Vec<LabelFamily>,
}

pub(crate) const LEAD_IN: &str =
    r"^(?:(?:please|also|and|then|ensure|enforce|make sure|guarantee|we need to|we must)(?: that)?\s+)*";

pub fn grammar_spec() -> Grammar {
    let productions = vec![
        Production {
            name: "forbid-prohibit",
            kind: ProductionKind::PlacementForbid,
            pattern: r"^(?:prohibit|forbid|disallow|block|ban) (?P<w>.+?) (?:deployments?|placement|scheduling) (?:on|in|to|at) (?P<n>.+)$",
            example: "prohibit financial database service deployment in the cloud zone",
        },
        Production {
            name: "forbid-prevent",
            kind: ProductionKind::PlacementForbid,
            pattern: r"^(?:prevent|stop) (?P<w>.+?) from (?:being )?(?:deployed|placed|scheduled|running|hosted) (?:on|in|to|at) (?P<n>.+)$",
            example: "prevent sensitive databases from being deployed in the edge zone",
        },
        Production {
            name: "forbid-never",
            kind: ProductionKind::PlacementForbid,
            pattern: r"^(?:never|do not|don't) (?:run|place|deploy|schedule|host) (?P<w>.+?) (?:on|in|at) (?P<n>.+)$",
            example: "never run phi workloads on alibaba-cloud nodes",
        },
        Production {
            name: "forbid-keep-off",
            kind: ProductionKind::PlacementForbid,
            pattern: r"^keep (?P<w>.+?) (?:off|out of|away from) (?P<n>.+)$",
            example: "keep the patient service off low-security nodes",
        },
        Production {
            name: "forbid-must-not",
            kind: ProductionKind::PlacementForbid,
            pattern: r"^(?P<w>.+?) (?:must not|should not|may not|cannot|can not|must never) (?:run|be run|be placed|be deployed|be scheduled|reside|be hosted) (?:on|in|at) (?P<n>.+)$",
            example: "general databases must not be deployed on edge nodes",
        },
        Production {
            name: "require-only",
            kind: ProductionKind::PlacementRequire,
            pattern: r"^(?:run|place|deploy|schedule|host|pin) (?P<w>.+?) only (?:on|in|at|to) (?P<n>.+)$",
            example: "run appointment only on high-security cloud nodes",
        },
        Production {
            name: "require-must-only",
            kind: ProductionKind::PlacementRequire,
            pattern: r"^(?P<w>.+?) (?:must|should|may) only (?:run|be run|be placed|be deployed|be scheduled|reside|be hosted) (?:on|in|at) (?P<n>.+)$",
            example: "the doctor service may only run on azure nodes",
        },
        Production {
            name: "require-must",
            kind: ProductionKind::PlacementRequire,
            pattern: r"^(?P<w>.+?) (?:must|should) (?:run|be run|be placed|be deployed|be scheduled|reside|stay|remain|be hosted) (?:on|in|at|within) (?P<n>.+)$",
            example: "phi workloads must stay in the cloud zone",
        },
        Production {
            name: "require-keep-in",
            kind: ProductionKind::PlacementRequire,
            pattern: r"^keep (?P<w>.+?) (?:on|in|at|within) (?P<n>.+)$",
            example: "keep patient data in the eu region",
        },
        Production {
            name: "require-restrict",
            kind: ProductionKind::PlacementRequire,
            pattern: r"^restrict (?P<w>.+?) to (?P<n>.+)$",
            example: "restrict the vital sign monitor to london or sydney nodes",
        },
        Production {
            name: "route-fan-in",
            kind: ProductionKind::RoutingFanIn,
            pattern: r"^all (?:other )?hosts (?:communicating|talking|sending traffic) (?:with|to) (?P<dst>.+?) (?:must |should )?(?:traverse|pass through|go through|be routed through|transit) (?P<via>.+)$",
            example: "all other hosts communicating with host 4 must pass through the backup switch s8",
        },
        Production {
            name: "route-between-avoid",
            kind: ProductionKind::RoutingBetweenAvoid,
            pattern: r"^(?:all )?traffic between (?P<a>.+?) and (?P<b>.+?) (?:must |should )?(?:avoid|bypass|never traverse|never pass through|not traverse|not pass through|stay away from) (?P<avoid>.+)$",
            example: "traffic between host 1 and host 5 must avoid huawei switches",
        },
        Production {
            name: "route-between-via",
            kind: ProductionKind::RoutingBetweenVia,
            pattern: r"^(?:all )?traffic between (?P<a>.+?) and (?P<b>.+?) (?:must |should )?(?:traverse|pass through|go through|be routed through|be routed via|transit|flow through) (?P<via>.+?)(?: (?:while |and )?(?:avoiding|bypassing) (?P<avoid>.+))?$",
            example: "traffic between host 1 and host 3 must pass through s7",
        },
        Production {
            name: "route-avoid",
            kind: ProductionKind::RoutingAvoid,
            pattern: r"^(?:all )?traffic from (?P<src>.+?) to (?P<dst>.+?) (?:must |should )?(?:avoid|bypass|never traverse|never pass through|not traverse|not pass through|stay away from) (?P<avoid>.+)$",
            example: "traffic from host 1 to host 4 must avoid untrusted switches",
        },
        Production {
            name: "route-via",
            kind: ProductionKind::RoutingVia,
            pattern: r"^(?:all )?traffic from (?P<src>.+?) to (?P<dst>.+?) (?:must |should )?(?:traverse|pass through|go through|be routed through|be routed via|transit|flow through) (?P<via>.+?)(?: (?:while |and )?(?:avoiding|bypassing) (?P<avoid>.+))?$",
            example: "ensure that all traffic from host 2 to host 4 must traverse the backup switch s8",
        },
        Production {
            name: "route-command-via",
            kind: ProductionKind::RoutingVia,
            pattern: r"^route (?:all )?traffic from (?P<src>.+?) to (?P<dst>.+?) (?:through|via) (?P<via>.+?)(?: (?:while |and )?(?:avoiding|bypassing) (?P<avoid>.+))?$",
            example: "route traffic from host 3 to host 5 via s9 avoiding s6",
        },
        Production {
            name: "route-command-avoid",
            kind: ProductionKind::RoutingAvoid,
            pattern: r"^route (?:all )?traffic from (?P<src>.+?) to (?P<dst>.+?) (?:around|avoiding|bypassing) (?P<avoid>.+)$",
            example: "route traffic from host 1 to host 2 around s3",
        },
    ];
    let families = vec![
        LabelFamily {
            name: "locality",
            entity: "node",
            keys: &["location"],
            phrases: "city names (`london`, `new york`), region names resolved to the cities present (`eu`, `us`, `asia`, `apac`)",
        },
        LabelFamily {
            name: "provider",
            entity: "node",
            keys: &["provider"],
            phrases: "provider names (`aws`, `azure`, `gcp`, `alibaba cloud`)",
        },
        LabelFamily {
            name: "trust zone",
            entity: "node",
            keys: &["zone", "security"],
            phrases: "`edge`, `cloud`, `<level>-security`, `<level> security`",
        },
        LabelFamily {
            name: "vendor and protocol",
            entity: "device",
            keys: &["mfr", "protocol"],
            phrases: "`huawei switches`, `switches made by cisco`, `of_13 switches`",
        },
        LabelFamily {
            name: "device trust and role",
            entity: "device",
            keys: &["trusted", "role"],
            phrases: "`untrusted switches`, `the backup switch s8`",
        },
        LabelFamily {
            name: "workload category",
            entity: "workload",
            keys: &["app", "data-type", "tier"],
            phrases: "workload names, `phi`/`sensitive` data, `databases`, `<name> database`",
        },
    ];
    Grammar {
        separators: &[";", ", and", ", and then", ",", "and also", "bare `and` (when both sides parse)"],
        lead_ins: "please, also, ensure (that), enforce (that), make sure (that), guarantee (that)",
        productions,
        families,
    }
}

impl Grammar {
    /// Human-readable grammar reference.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("Rule-based intent grammar\n=========================\n\n");
        out.push_str("Input is lowercased, `~` becomes a space and trailing punctuation is dropped.\n");
        let _ = writeln!(out, "Fragment separators: {}", self.separators.join(" | "));
        let _ = writeln!(out, "Optional lead-ins: {}\n", self.lead_ins);
        out.push_str("Productions\n-----------\n");
        for p in &self.productions {
            let kind = serde_json::to_value(p.kind).expect("kind serializes");
            let _ = writeln!(out, "{} ({})", p.name, kind.as_str().unwrap_or_default());
            let _ = writeln!(out, "  pattern: {}", p.pattern);
            let _ = writeln!(out, "  example: {}\n", p.example);
        }
        out.push_str("Label families\n--------------\n");
        for f in &self.families {
            let _ = writeln!(out, "{} [{}: {}]", f.name, f.entity, f.keys.join(", "));
            let _ = writeln!(out, "  {}\n", f.phrases);
        }
        out
    }
}
