//! Seeded synthetic incident corpus with gold entity spans and teams.
//!
//! Each incident renders its entities as key-value lines, narrow HTML tables
//! or inline prose (the latter without any structural marker), surrounded by
//! filler sentences and optional noise.

use std::collections::HashSet;
use std::path::Path;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{EntityCatalog, EntityType};
use crate::corpus::{write_jsonl, Document, Incident};
use crate::eval::Span;
use crate::propagation::{LabeledCorpus, LabeledSentence, LabeledSpan, Provenance};
use crate::typing::{classify_value, DataType};
use crate::{Error, Result};

/// One entity type: display name, declared data type, value pool and
/// prose templates (`{v}` marks the value) for inline mentions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EntitySpec {
    pub name: String,
    pub data_type: DataType,
    pub values: Vec<String>,
    pub inline_templates: Vec<String>,
}

impl EntitySpec {
    /// Lower-cased, space-joined type name as the bootstrapper sees it.
    pub fn type_name(&self) -> String {
        self.name.to_ascii_lowercase()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TeamSignature {
    pub name: String,
    /// Per schema entry: probability the type appears in an incident.
    pub type_weights: Vec<f64>,
    /// Probability a value is drawn from the team's own slice of the pool.
    pub value_bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SynthConfig {
    pub seed: u64,
    pub num_incidents: usize,
    pub schema: Vec<EntitySpec>,
    pub teams: Vec<TeamSignature>,
    pub inline_rate: f64,
    /// Share of structured mentions rendered in tables (rest are key-value lines).
    pub table_rate: f64,
    pub typo_rate: f64,
    pub spurious_colon_rate: f64,
    pub wide_table_rate: f64,
    pub filler_sentences: (usize, usize),
}

impl SynthConfig {
    /// Default schema with evenly spread teams.
    pub fn new(seed: u64, num_incidents: usize) -> Self {
        Self::with_schema(seed, num_incidents, default_schema(), 10)
    }

    pub fn with_schema(seed: u64, num_incidents: usize, schema: Vec<EntitySpec>, num_teams: usize) -> Self {
        let teams = make_teams(&schema, num_teams, seed);
        Self {
            seed,
            num_incidents,
            schema,
            teams,
            inline_rate: 0.3,
            table_rate: 0.3,
            typo_rate: 0.02,
            spurious_colon_rate: 0.1,
            wide_table_rate: 0.1,
            filler_sentences: (2, 5),
        }
    }

    /// Drop schema entries by (case-insensitive) name, keeping teams aligned.
    pub fn without(mut self, names: &[&str]) -> Self {
        let drop: HashSet<String> = names.iter().map(|n| n.to_ascii_lowercase()).collect();
        let keep: Vec<bool> = self.schema.iter().map(|e| !drop.contains(&e.type_name())).collect();
        let mut it = keep.iter();
        self.schema.retain(|_| *it.next().unwrap());
        for t in &mut self.teams {
            let mut it = keep.iter();
            t.type_weights.retain(|_| *it.next().unwrap());
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let rate = |name: &str, r: f64| {
            if (0.0..=1.0).contains(&r) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in [0, 1], got {r}")))
            }
        };
        rate("inline rate", self.inline_rate)?;
        rate("table rate", self.table_rate)?;
        rate("typo rate", self.typo_rate)?;
        rate("spurious colon rate", self.spurious_colon_rate)?;
        rate("wide table rate", self.wide_table_rate)?;
        if self.teams.is_empty() {
            return Err(Error::Config("at least one team is required".into()));
        }
        if self.schema.is_empty() {
            return Err(Error::Config("entity schema is empty".into()));
        }
        for e in &self.schema {
            if e.values.is_empty() {
                return Err(Error::Config(format!("value pool of {:?} is empty", e.name)));
            }
            if e.inline_templates.iter().any(|t| !t.contains("{v}")) {
                return Err(Error::Config(format!("inline template of {:?} lacks {{v}}", e.name)));
            }
        }
        for t in &self.teams {
            if t.type_weights.len() != self.schema.len() {
                return Err(Error::Config(format!("team {:?} has a malformed signature", t.name)));
            }
            rate("team value bias", t.value_bias)?;
        }
        if self.filler_sentences.0 > self.filler_sentences.1 {
            return Err(Error::Config("filler sentence range is inverted".into()));
        }
        Ok(())
    }

    /// Catalog of the planted types with their declared data types.
    pub fn gold_catalog(&self) -> EntityCatalog {
        EntityCatalog {
            entries: self
                .schema
                .iter()
                .map(|e| EntityType {
                    name: e.type_name(),
                    frequency: 0,
                    data_type: Some(e.data_type),
                })
                .collect(),
            capacity: self.schema.len(),
        }
    }

    pub fn truth_names(&self) -> HashSet<String> {
        self.schema.iter().map(EntitySpec::type_name).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MentionKind {
    KeyValue,
    Table,
    Inline,
}

/// A gold entity occurrence; `start..end` is a byte range of the description HTML.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GoldSpan {
    pub entity_type: String,
    pub value: String,
    pub data_type: DataType,
    pub start: usize,
    pub end: usize,
    pub kind: MentionKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GoldRecord {
    pub incident_id: String,
    pub team: String,
    pub spans: Vec<GoldSpan>,
}

impl GoldRecord {
    pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Vec<GoldRecord>> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| Error::Malformed {
                    line: i + 1,
                    message: e.to_string(),
                })
            })
            .collect()
    }
}

pub fn write_synth(
    corpus_path: impl AsRef<Path>,
    gold_path: impl AsRef<Path>,
    incidents: &[Incident],
    gold: &[GoldRecord],
) -> Result<()> {
    write_jsonl(corpus_path, incidents)?;
    write_jsonl(gold_path, gold)
}

const FILLER: &[&str] = &[
    "Customer reported intermittent connectivity issues since this morning.",
    "The on-call engineer acknowledged the alert and started investigating.",
    "Monitoring detected a spike in failed requests over the last hour.",
    "Several users are unable to reach the portal from their offices.",
    "The issue started after the latest deployment rolled out.",
    "Retries did not resolve the problem and the backlog keeps growing.",
    "Please investigate and share an update with the customer.",
    "The service health dashboard shows degraded performance.",
    "No recent configuration changes were made by the customer.",
    "We suspect a dependency is timing out under heavy load.",
    "The incident was raised automatically by the health monitor.",
    "Logs indicate repeated authentication failures in the region.",
    "A mitigation was attempted but the symptoms persist.",
    "The customer impact is limited to a subset of workloads.",
    "Engineering was paged because the error budget is exhausted.",
    "Traffic was shifted away from the affected cluster as a precaution.",
    "The support ticket was escalated by the account team.",
    "We are collecting traces to narrow down the root cause.",
    "Latency went up sharply during the nightly batch window.",
    "The problem reproduces consistently with the steps provided.",
    "An earlier incident with similar symptoms was resolved last week.",
    "The backend team confirmed that storage is healthy.",
    "Customers in other regions are not affected at this time.",
    "A hotfix is being prepared and will be validated in staging.",
];

const NOISE_KEYS: &[&str] = &[
    "Note", "Update", "Next steps", "Impact", "Summary", "Action taken", "Reported by", "Workaround",
    "Current state", "Token acquisition started", "Investigation notes", "Repro steps", "Escalation",
    "Customer ask", "Mitigation", "Outcome", "Follow up", "Ticket owner", "Comment", "Detected by",
];

const NOISE_VALUES: &[&str] = &[
    "the team is still investigating",
    "waiting for the customer to respond",
    "engaged the networking team",
    "restart did not help",
    "see the attached logs",
    "monitoring will continue overnight",
    "customer confirmed the workaround",
    "pending a deployment",
    "auto generated by the alerting pipeline",
    "on-call engineer",
];

const TITLES: &[&str] = &[
    "Service degradation reported",
    "Customer unable to connect",
    "Alert fired for failed requests",
    "Investigate deployment failure",
    "Connectivity issue in production",
    "Health check failing",
    "Intermittent errors observed",
    "Escalated support case",
];

fn s(v: &[&str]) -> Vec<String> {
    v.iter().map(|x| x.to_string()).collect()
}

fn guid(rng: &mut impl Rng) -> String {
    let hex = |rng: &mut dyn rand::RngCore, n: usize| -> String {
        (0..n).map(|_| char::from_digit(rng.random_range(0..16), 16).unwrap()).collect()
    };
    format!(
        "{}-{}-{}-{}-{}",
        hex(rng, 8),
        hex(rng, 4),
        hex(rng, 4),
        hex(rng, 4),
        hex(rng, 12)
    )
}

fn pool(n: usize, rng: &mut ChaCha8Rng, mut f: impl FnMut(&mut ChaCha8Rng, usize) -> String) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut i = 0;
    // small grammars may not have `n` distinct values
    while out.len() < n && i < n * 50 {
        let v = f(rng, i);
        i += 1;
        if seen.insert(v.clone()) {
            out.push(v);
        }
    }
    out
}

/// Schema modeled on the eleven example entities (types, data types and
/// value shapes) of the original study.
pub fn default_schema() -> Vec<EntitySpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let regions = ["eastus", "westus", "northeurope", "westeurope", "centralus", "southindia", "japaneast", "uksouth"];
    let spec = |name: &str, dt: DataType, values: Vec<String>, templates: &[&str]| EntitySpec {
        name: name.into(),
        data_type: dt,
        values,
        inline_templates: s(templates),
    };
    vec![
        spec(
            "Problem Type",
            DataType::Alphabetical,
            s(&[
                "Disk Failure", "Network Outage", "Timeout", "Throttling", "Certificate Expiry", "Quota Exceeded",
                "Memory Leak", "Gateway Failure", "Latency", "Packet Loss", "Auth Failure", "Crash",
                "Overheating", "Misconfiguration", "Deadlock", "Corruption", "Replication Lag", "Outage",
                "Capacity Shortage", "Dns Failure",
            ]),
            &[
                "This looks like another case of {v} on the cluster.",
                "Engineers classified the problem as {v} after triage.",
                "Symptoms are consistent with {v} seen earlier.",
            ],
        ),
        spec(
            "Exception Message",
            DataType::Alphabetical,
            s(&[
                "The vpn gateway deployment operation failed due to an intermittent error",
                "The remote host closed the connection unexpectedly",
                "Object reference not set to an instance of an object",
                "The operation was canceled because the request timed out",
                "Access to the requested resource is denied",
                "The specified blob does not exist",
                "The server encountered an internal error",
                "The network path was not found",
                "A task was canceled while waiting for the lock",
                "The certificate chain was issued by an untrusted authority",
            ]),
            &[
                "The worker crashed with {v} during startup.",
                "Callers receive {v} on every retry.",
            ],
        ),
        spec(
            "Failed Operation Name",
            DataType::Alphabetical,
            s(&[
                "Create and Mount Volume", "Attach Network Interface", "Delete Virtual Machine",
                "Update Gateway Configuration", "Restart Compute Node", "Provision Storage Account",
                "Resize Disk", "Rotate Certificate", "Scale Out Cluster", "Deploy Function App",
                "Renew Lease", "Sync Directory",
            ]),
            &[
                "The request to {v} never completed.",
                "Every attempt to {v} ends in a failure.",
                "The portal keeps retrying {v} without success.",
            ],
        ),
        spec(
            "Resource Id",
            DataType::Uri,
            pool(40, &mut rng, |r, _| {
                let providers = ["network/frontdoor", "compute/virtualmachines", "storage/accounts", "web/sites", "sql/servers"];
                let groups = ["cs-net", "prod-rg", "core-infra", "app-backend", "shared-svc", "edge-rg"];
                format!(
                    "/resource/{}/resourcegroups/{}/providers/{}/",
                    guid(r),
                    groups.choose(r).unwrap(),
                    providers.choose(r).unwrap()
                )
            }),
            &[
                "The affected resource is {v} according to the portal.",
                "Health probes against {v} are failing.",
                "Please check the activity log for {v} as well.",
            ],
        ),
        spec(
            "Tenant Id",
            DataType::Guid,
            pool(40, &mut rng, |r, _| guid(r)),
            &[
                "Requests for tenant {v} are rejected by the gateway.",
                "The customer owns tenant {v} and reports total impact.",
                "Only tenant {v} appears in the failure logs.",
            ],
        ),
        spec(
            "Vnet Id",
            DataType::Guid,
            pool(40, &mut rng, |r, _| guid(r)),
            &[
                "Peering with the virtual network {v} was dropped.",
                "The vnet {v} lost its route table.",
                "Subnets inside virtual network {v} cannot reach storage.",
            ],
        ),
        spec(
            "Link With Details",
            DataType::Uri,
            pool(40, &mut rng, |r, i| {
                let hosts = ["supportcenter.cloudx.com/caseoverview", "portal.cloudx.com/incident", "wiki.cloudx.com/tsg"];
                format!("https://{}?srid={}", hosts[i % hosts.len()], r.random_range(100..100_000))
            }),
            &[
                "More context is available at {v} for reviewers.",
                "The full case history lives at {v} today.",
            ],
        ),
        spec(
            "Device Name",
            DataType::Other,
            pool(40, &mut rng, |r, _| {
                format!(
                    "sab{:02}-{}{}-{}d",
                    r.random_range(0..100),
                    r.random_range(10..100),
                    ["cba", "xkf", "mnt", "pqr", "zed"].choose(r).unwrap(),
                    r.random_range(1..10)
                )
            }),
            &[
                "The router {v} rebooted twice overnight.",
                "Hardware alarms were raised on {v} before the outage.",
                "Traffic through device {v} is being dropped.",
            ],
        ),
        spec(
            "Source IP",
            DataType::IpAddress,
            pool(40, &mut rng, |r, _| {
                format!("{}.{}.{}.{}", [10, 172, 192, 198][r.random_range(0..4)], r.random_range(0..256), r.random_range(0..256), r.random_range(1..255))
            }),
            &[
                "Connections originating from {v} are being refused.",
                "The firewall blocked repeated calls from {v} today.",
                "Requests sent by {v} time out after thirty seconds.",
            ],
        ),
        spec(
            "Status Code",
            DataType::Numeric,
            s(&["500", "502", "503", "504", "401", "403", "404", "409", "429", "400"]),
            &[
                "The endpoint keeps returning {v} to every caller.",
                "Clients observe HTTP {v} responses intermittently.",
                "The gateway answered with {v} for most requests.",
            ],
        ),
        spec(
            "Location",
            DataType::Alphanumeric,
            pool(30, &mut rng, |r, _| format!("{}{}", regions.choose(r).unwrap(), r.random_range(1..5))),
            &[
                "Only workloads hosted in {v} are affected.",
                "The deployment to {v} was paused by the release team.",
                "Capacity in {v} dropped below the safe threshold.",
            ],
        ),
    ]
}

const QUALIFIERS: &[&str] = &[
    "cluster", "node", "request", "storage", "gateway", "session", "pipeline", "database", "cache", "queue",
    "tenant", "deployment", "backup", "release", "job", "container", "disk", "certificate", "partition", "router",
];

/// Heads with the data type and value shape they imply.
const HEADS: &[(&str, DataType)] = &[
    ("id", DataType::Guid),
    ("ip", DataType::IpAddress),
    ("url", DataType::Uri),
    ("count", DataType::Numeric),
    ("region", DataType::Alphanumeric),
    ("host", DataType::Other),
    ("state", DataType::Alphabetical),
];

/// `n` planted entity types named `<qualifier> <head>` with values drawn
/// from the head's data type.
pub fn planted_schema(n: usize, seed: u64) -> Vec<EntitySpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut combos: Vec<(usize, usize)> = (0..QUALIFIERS.len())
        .flat_map(|q| (0..HEADS.len()).map(move |h| (q, h)))
        .collect();
    combos.shuffle(&mut rng);
    combos
        .into_iter()
        .take(n)
        .map(|(q, h)| {
            let (head, dt) = HEADS[h];
            let values = pool(20, &mut rng, |r, _| match dt {
                DataType::Guid => guid(r),
                DataType::IpAddress => format!("10.{}.{}.{}", r.random_range(0..256), r.random_range(0..256), r.random_range(1..255)),
                DataType::Uri => format!("https://{}.cloudx.com/view?id={}", QUALIFIERS[q], r.random_range(1..100_000)),
                DataType::Numeric => r.random_range(100..100_000).to_string(),
                DataType::Alphanumeric => format!("{}{}", ["east", "west", "north", "south"].choose(r).unwrap(), r.random_range(1..9)),
                DataType::Other => format!("{}-{:03}-x{}", &QUALIFIERS[q][..3], r.random_range(0..1000), r.random_range(1..9)),
                _ => ["Running", "Stopped", "Degraded", "Healthy", "Draining", "Pending"].choose(r).unwrap().to_string(),
            });
            let name = format!("{} {}", capitalize(QUALIFIERS[q]), if head == "ip" { "IP".into() } else { capitalize(head) });
            EntitySpec {
                inline_templates: vec![
                    format!("The {} {{v}} shows up in the logs.", name.to_ascii_lowercase()),
                    "We also noticed {v} while investigating.".into(),
                ],
                name,
                data_type: dt,
                values,
            }
        })
        .collect()
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    c.next().map_or_else(String::new, |f| f.to_uppercase().chain(c).collect())
}

/// Teams get disjoint-ish "home" types (high weight) and low weights elsewhere.
fn make_teams(schema: &[EntitySpec], n: usize, seed: u64) -> Vec<TeamSignature> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7ea4);
    let k = schema.len();
    (0..n)
        .map(|t| {
            let home: HashSet<usize> = (0..k.min(4)).map(|j| (t * 3 + j * 7) % k.max(1)).collect();
            TeamSignature {
                name: format!("Team{:02}", t + 1),
                type_weights: (0..k)
                    .map(|i| if home.contains(&i) { rng.random_range(0.8..0.95) } else { rng.random_range(0.1..0.3) })
                    .collect(),
                value_bias: 0.8,
            }
        })
        .collect()
}

struct Html {
    buf: String,
    spans: Vec<GoldSpan>,
}

impl Html {
    fn raw(&mut self, s: &str) {
        self.buf.push_str(s);
    }

    fn value(&mut self, spec: &EntitySpec, v: &str, kind: MentionKind) {
        let start = self.buf.len();
        self.buf.push_str(v);
        self.spans.push(GoldSpan {
            entity_type: spec.type_name(),
            value: v.to_string(),
            data_type: spec.data_type,
            start,
            end: self.buf.len(),
            kind,
        });
    }

    /// Text with an embedded `{v}` placeholder.
    fn template(&mut self, spec: &EntitySpec, template: &str, v: &str) {
        let (a, b) = template.split_once("{v}").expect("validated template");
        self.raw(a);
        self.value(spec, v, MentionKind::Inline);
        self.raw(b);
    }
}

fn typo(word: &str, rng: &mut ChaCha8Rng) -> String {
    let mut chars: Vec<char> = word.chars().collect();
    if chars.len() >= 4 && chars.iter().all(|c| c.is_ascii_alphabetic()) {
        let i = rng.random_range(1..chars.len() - 2);
        chars.swap(i, i + 1);
    }
    chars.into_iter().collect()
}

fn filler(rng: &mut ChaCha8Rng, typo_rate: f64) -> String {
    let base = FILLER.choose(rng).unwrap();
    base.split(' ')
        .map(|w| if rng.random_bool(typo_rate) { typo(w, rng) } else { w.to_string() })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Key rendering variants; all tokenize to the same lower-cased name.
fn render_key(name: &str, rng: &mut ChaCha8Rng) -> String {
    match rng.random_range(0..6) {
        0 => name.split(' ').map(capitalize).collect::<Vec<_>>().join(""),
        1 => name.to_ascii_lowercase(),
        2 => name.to_ascii_uppercase(),
        _ => name.to_string(),
    }
}

enum Block {
    Text(String),
    KeyValue(usize, String),
    Table(Vec<(usize, String)>),
    Inline(usize, String),
    Noise(String, String),
    Wide,
}

fn generate_one(cfg: &SynthConfig, index: usize, rng: &mut ChaCha8Rng, base: DateTime<Utc>) -> (Incident, GoldRecord) {
    let team_idx = rng.random_range(0..cfg.teams.len());
    let team = &cfg.teams[team_idx];
    let n_teams = cfg.teams.len();

    let mut mentions: Vec<(usize, String)> = Vec::new();
    for (t, spec) in cfg.schema.iter().enumerate() {
        if !rng.random_bool(team.type_weights[t].clamp(0.0, 1.0)) {
            continue;
        }
        let own: Vec<&String> = spec.values.iter().enumerate().filter(|(i, _)| i % n_teams == team_idx).map(|(_, v)| v).collect();
        let v = if !own.is_empty() && rng.random_bool(team.value_bias) {
            (*own.choose(rng).unwrap()).clone()
        } else {
            spec.values.choose(rng).unwrap().clone()
        };
        let times = if rng.random_bool(0.2) { 2 } else { 1 };
        for _ in 0..times {
            mentions.push((t, v.clone()));
        }
    }

    let mut blocks = Vec::new();
    let mut table_cells = Vec::new();
    for (t, v) in mentions {
        if rng.random_bool(cfg.inline_rate) && !cfg.schema[t].inline_templates.is_empty() {
            blocks.push(Block::Inline(t, v));
        } else if rng.random_bool(cfg.table_rate) {
            table_cells.push((t, v));
        } else {
            blocks.push(Block::KeyValue(t, v));
        }
    }
    for chunk in table_cells.chunks(2) {
        blocks.push(Block::Table(chunk.to_vec()));
    }
    let (lo, hi) = cfg.filler_sentences;
    for _ in 0..rng.random_range(lo..=hi) {
        if rng.random_bool(cfg.spurious_colon_rate) {
            let k = NOISE_KEYS.choose(rng).unwrap().to_string();
            let v = NOISE_VALUES.choose(rng).unwrap().to_string();
            blocks.push(Block::Noise(k, v));
        } else {
            blocks.push(Block::Text(filler(rng, cfg.typo_rate)));
        }
    }
    if rng.random_bool(cfg.wide_table_rate) {
        blocks.push(Block::Wide);
    }
    blocks.shuffle(rng);

    let mut html = Html {
        buf: String::from("<div>"),
        spans: Vec::new(),
    };
    for b in blocks {
        match b {
            Block::Text(t) => html.raw(&format!("<p>{t}</p>")),
            Block::Noise(k, v) => html.raw(&format!("<p>{k}: {v}</p>")),
            Block::KeyValue(t, v) => {
                let spec = &cfg.schema[t];
                let key = render_key(&spec.name, rng);
                match rng.random_range(0..3) {
                    0 => html.raw(&format!("<p><b>{key}:</b> ")),
                    1 => html.raw(&format!("<p>{key} : ")),
                    _ => html.raw(&format!("<p>{key}: ")),
                }
                html.value(spec, &v, MentionKind::KeyValue);
                html.raw("</p>");
            }
            Block::Inline(t, v) => {
                let spec = &cfg.schema[t];
                let tpl = spec.inline_templates.choose(rng).unwrap().clone();
                html.raw("<p>");
                html.template(spec, &tpl, &v);
                html.raw("</p>");
            }
            Block::Table(cells) => {
                html.raw("<table><tr>");
                for (t, _) in &cells {
                    html.raw(&format!("<th>{}</th>", cfg.schema[*t].name));
                }
                html.raw("</tr><tr>");
                for (t, v) in &cells {
                    html.raw("<td>");
                    html.value(&cfg.schema[*t], v, MentionKind::Table);
                    html.raw("</td>");
                }
                html.raw("</tr></table>");
            }
            Block::Wide => {
                html.raw("<table><tr><th>Time</th><th>Event</th><th>Count</th></tr>");
                for _ in 0..rng.random_range(1..4) {
                    html.raw(&format!(
                        "<tr><td>{:02}:{:02}</td><td>{}</td><td>{}</td></tr>",
                        rng.random_range(0..24),
                        rng.random_range(0..60),
                        ["retry", "failover", "probe failed", "restart"].choose(rng).unwrap(),
                        rng.random_range(1..50)
                    ));
                }
                html.raw("</table>");
            }
        }
    }
    html.raw("</div>");

    let id = format!("INC{:06}", index + 1);
    let problem = cfg
        .schema
        .iter()
        .position(|e| e.type_name() == "problem type")
        .and_then(|p| html.spans.iter().find(|s| s.entity_type == cfg.schema[p].type_name()));
    let title = match problem {
        Some(p) if rng.random_bool(0.5) => format!("{} reported", p.value),
        _ => TITLES.choose(rng).unwrap().to_string(),
    };
    let incident = Incident {
        id: id.clone(),
        title,
        description_html: html.buf,
        created_at: base + Duration::minutes(37 * index as i64),
        owning_team: team.name.clone(),
        resolved: rng.random_bool(0.8),
    };
    let gold = GoldRecord {
        incident_id: id,
        team: team.name.clone(),
        spans: html.spans,
    };
    (incident, gold)
}

/// Generate incidents and their gold records. Each incident draws from its
/// own seed derived from `(config.seed, index)`.
pub fn generate(config: &SynthConfig) -> Result<(Vec<Incident>, Vec<GoldRecord>)> {
    config.validate()?;
    let base = Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap();
    let (incidents, gold): (Vec<_>, Vec<_>) = (0..config.num_incidents)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_mul(0x100_0000_01b3).wrapping_add(i as u64));
            generate_one(config, i, &mut rng, base)
        })
        .unzip();
    if !incidents.is_empty() {
        let words: usize = incidents
            .iter()
            .map(|i| crate::corpus::clean_incident(i).sentences.iter().map(|s| s.split(' ').count()).sum::<usize>())
            .sum();
        log::info!(
            "generated {} incidents, mean {:.1} words per description",
            incidents.len(),
            words as f64 / incidents.len() as f64
        );
    }
    Ok((incidents, gold))
}

/// Gold spans projected onto document tokens, per sentence in document order.
/// Spans that do not align with token boundaries are skipped (and counted).
pub fn align_gold(docs: &[Document], gold: &[GoldRecord]) -> (Vec<Vec<(Span, MentionKind)>>, usize) {
    let by_id: std::collections::HashMap<&str, &GoldRecord> = gold.iter().map(|g| (g.incident_id.as_str(), g)).collect();
    let mut out = Vec::new();
    let mut unaligned = 0;
    for doc in docs {
        let mut per_sentence: Vec<Vec<(Span, MentionKind)>> = vec![Vec::new(); doc.sentences.len()];
        let spans = by_id.get(doc.incident_id()).map_or(&[][..], |g| &g.spans[..]);
        for g in spans {
            let mut found = false;
            'outer: for (si, s) in doc.sentences.iter().enumerate() {
                let raw: Vec<Option<(usize, usize)>> = s.tokens.iter().map(|t| doc.clean.source_range(si, t.start, t.end)).collect();
                let Some(a) = raw.iter().position(|r| r.is_some_and(|r| r.0 == g.start)) else {
                    continue;
                };
                for (b, r) in raw.iter().enumerate().skip(a) {
                    match r {
                        Some(r) if r.1 == g.end => {
                            per_sentence[si].push(((a, b + 1, g.entity_type.clone()), g.kind));
                            found = true;
                            break 'outer;
                        }
                        Some(r) if r.1 > g.end => break,
                        _ => {}
                    }
                }
            }
            unaligned += usize::from(!found);
        }
        for v in &mut per_sentence {
            v.sort_by(|x, y| x.0.cmp(&y.0));
            v.dedup_by(|x, y| x.0 .0 < y.0 .1 && y.0 .0 < x.0 .1);
        }
        out.extend(per_sentence);
    }
    (out, unaligned)
}

/// Gold labeled corpus over the documents' own tokenization.
pub fn gold_corpus(docs: &[Document], gold: &[GoldRecord], catalog: &EntityCatalog) -> LabeledCorpus {
    let (aligned, _) = align_gold(docs, gold);
    let mut sentences = Vec::new();
    let mut it = aligned.into_iter();
    for doc in docs {
        for s in &doc.sentences {
            let spans = it
                .next()
                .unwrap_or_default()
                .into_iter()
                .map(|((a, b, t), _)| LabeledSpan {
                    start: a,
                    end: b,
                    entity_type: t,
                    provenance: Provenance::Pattern,
                })
                .collect();
            sentences.push(LabeledSentence::from_spans(doc.incident_id(), &s.text, s.tokens.clone(), spans, catalog));
        }
    }
    LabeledCorpus {
        sentences,
        catalog: catalog.clone(),
    }
}

/// Gold self-consistency: every value classifies to its declared data type.
pub fn check_gold(gold: &[GoldRecord]) -> Result<()> {
    for r in gold {
        for s in &r.spans {
            let got = classify_value(&s.value)?;
            if got != s.data_type {
                return Err(Error::Config(format!(
                    "{}: value {:?} of {:?} classifies as {got}, declared {}",
                    r.incident_id, s.value, s.entity_type, s.data_type
                )));
            }
        }
    }
    Ok(())
}
