//! The public board, the CA secret store, and their on-disk form.
//!
//! Both files are single JSON documents carrying `"version": 1`. Every
//! integer is written as a decimal string. Filters are published as their
//! coefficients in ascending order with the monic leading 1 left off; a
//! zero filter is `null`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_bigint::BigUint;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{CurveContext, Point, PointMap};
use crate::hierarchy::{ClassId, Hierarchy};
use crate::modmath::Poly;
use crate::schemes::{ClassSecret, Scheme, SchemeError, SchemeParams, SecureFilter};

pub const FORMAT_VERSION: u32 = 1;
pub const BOARD_FILE: &str = "board.json";
pub const SECRETS_FILE: &str = "ca_secrets.json";
pub const EPOCH_DIR: &str = "epochs";

#[derive(Debug, Error)]
pub enum BoardError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("bad field {field}: {message}")]
    Field { field: String, message: String },
    #[error("unsupported format version {found} (expected {FORMAT_VERSION})")]
    VersionMismatch { found: u32 },
    #[error("boards disagree: {0}")]
    SchemeMismatch(String),
    #[error("no snapshot for epoch {0}")]
    UnknownEpoch(u64),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
}

impl From<serde_json::Error> for BoardError {
    fn from(e: serde_json::Error) -> Self {
        BoardError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

fn field_err(field: impl Into<String>, message: impl ToString) -> BoardError {
    BoardError::Field {
        field: field.into(),
        message: message.to_string(),
    }
}

/// Per-class public data. Which fields are set depends on the scheme.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PublicClass {
    /// `P_i = n_i·G` on the curve schemes.
    pub public_key: Option<Point>,
    /// `g_i` on the Wu-style schemes.
    pub base: Option<u64>,
    /// `l_i` on Methods 1 and 2.
    pub shift: Option<u32>,
    /// `t_i` under Akl-Taylor.
    pub exponent: Option<BigUint>,
    /// Published filter; the zero polynomial when the class has no
    /// predecessors. `None` under Akl-Taylor.
    pub filter: Option<Poly>,
}

/// Everything the CA publishes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicBoard {
    pub epoch: u64,
    pub params: SchemeParams,
    pub hierarchy: Hierarchy,
    /// `P_ca`.
    pub ca_public: Option<Point>,
    /// Lin-Hsu salt `r` for this epoch.
    pub salt: Option<u64>,
    pub classes: BTreeMap<ClassId, PublicClass>,
}

impl PublicBoard {
    pub fn class(&self, id: &ClassId) -> Result<&PublicClass, SchemeError> {
        self.classes
            .get(id)
            .ok_or_else(|| SchemeError::UnknownClass(id.clone()))
    }

    pub fn secure_filter(&self, id: &ClassId) -> Result<SecureFilter, SchemeError> {
        let public = self.class(id)?;
        let poly = public
            .filter
            .clone()
            .ok_or_else(|| SchemeError::Inconsistent(format!("{id} has no filter")))?;
        Ok(SecureFilter {
            owner: id.clone(),
            scheme: self.params.scheme,
            poly,
            shift: public.shift,
            salt: self.salt,
        })
    }

    /// Filter degree per class, 0 for a zero filter.
    pub fn filter_degrees(&self) -> BTreeMap<ClassId, usize> {
        self.classes
            .iter()
            .filter_map(|(id, c)| {
                c.filter
                    .as_ref()
                    .map(|f| (id.clone(), f.degree().unwrap_or(0)))
            })
            .collect()
    }

    pub fn akl_exponents(&self) -> BTreeMap<ClassId, BigUint> {
        self.classes
            .iter()
            .filter_map(|(id, c)| c.exponent.clone().map(|t| (id.clone(), t)))
            .collect()
    }

    pub fn to_json(&self) -> Result<String, BoardError> {
        Ok(serde_json::to_string_pretty(&BoardWire::from(self))? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self, BoardError> {
        let probe: VersionProbe = serde_json::from_str(text)?;
        if probe.version != FORMAT_VERSION {
            return Err(BoardError::VersionMismatch {
                found: probe.version,
            });
        }
        let wire: BoardWire = serde_json::from_str(text)?;
        wire.into_board()
    }
}

/// Per-class CA secrets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassSecrets {
    /// `K_i`.
    pub key: u64,
    /// `n_i` or `s_i`.
    pub secret: ClassSecret,
    /// `h_i` on Methods 1 and 2.
    pub filter_secret: Option<u64>,
}

/// Everything only the CA knows, including its random generator state.
#[derive(Debug, Clone, PartialEq)]
pub struct CaSecrets {
    /// `n_ca`.
    pub ca_secret: Option<u64>,
    /// Akl-Taylor `K_0`.
    pub akl_root: Option<u64>,
    pub classes: BTreeMap<ClassId, ClassSecrets>,
    pub rng: ChaCha20Rng,
}

impl CaSecrets {
    pub fn to_json(&self) -> Result<String, BoardError> {
        Ok(serde_json::to_string_pretty(&SecretsWire::from(self))? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self, BoardError> {
        let probe: VersionProbe = serde_json::from_str(text)?;
        if probe.version != FORMAT_VERSION {
            return Err(BoardError::VersionMismatch {
                found: probe.version,
            });
        }
        let wire: SecretsWire = serde_json::from_str(text)?;
        wire.into_secrets()
    }
}

// ---------------------------------------------------------------------------
// Wire format
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct VersionProbe {
    version: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoardWire {
    version: u32,
    epoch: String,
    scheme: String,
    params: ParamsWire,
    classes: Vec<ClassWire>,
    edges: Vec<(String, String)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsWire {
    p: String,
    base: Option<String>,
    curve: Option<CurveWire>,
    ca_public: Option<PointWire>,
    salt: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CurveWire {
    p: String,
    a: String,
    b: String,
    gx: String,
    gy: String,
    q: String,
    map: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointWire {
    x: String,
    y: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassWire {
    id: String,
    filter: Option<Vec<String>>,
    public_key: Option<PointWire>,
    base: Option<String>,
    shift: Option<u32>,
    exponent: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SecretsWire {
    version: u32,
    ca_secret: Option<String>,
    akl_root: Option<String>,
    rng: RngWire,
    classes: Vec<ClassSecretWire>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RngWire {
    seed: String,
    word_pos: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassSecretWire {
    id: String,
    key: String,
    n: Option<String>,
    s: Option<String>,
    h: Option<String>,
}

fn dec(v: u64) -> String {
    v.to_string()
}

fn parse_u64(field: &str, s: &str) -> Result<u64, BoardError> {
    s.parse::<u64>().map_err(|e| field_err(field, e))
}

fn parse_opt(field: &str, s: &Option<String>) -> Result<Option<u64>, BoardError> {
    s.as_deref().map(|v| parse_u64(field, v)).transpose()
}

impl From<&Point> for PointWire {
    fn from(p: &Point) -> Self {
        match *p {
            Point::Affine { x, y } => PointWire { x: dec(x), y: dec(y) },
            Point::Infinity => PointWire {
                x: "inf".into(),
                y: "inf".into(),
            },
        }
    }
}

impl PointWire {
    fn to_point(&self, field: &str) -> Result<Point, BoardError> {
        if self.x == "inf" && self.y == "inf" {
            return Ok(Point::Infinity);
        }
        Ok(Point::Affine {
            x: parse_u64(&format!("{field}.x"), &self.x)?,
            y: parse_u64(&format!("{field}.y"), &self.y)?,
        })
    }
}

impl From<&PublicBoard> for BoardWire {
    fn from(b: &PublicBoard) -> Self {
        let params = &b.params;
        BoardWire {
            version: FORMAT_VERSION,
            epoch: dec(b.epoch),
            scheme: params.scheme.tag().into(),
            params: ParamsWire {
                p: dec(params.p()),
                base: params.radix.map(|r| dec(r.base())),
                curve: params.curve.as_ref().map(|c| {
                    let (gx, gy) = match c.generator() {
                        Point::Affine { x, y } => (x, y),
                        Point::Infinity => unreachable!("validated generator is affine"),
                    };
                    CurveWire {
                        p: dec(c.p()),
                        a: dec(c.a()),
                        b: dec(c.b()),
                        gx: dec(gx),
                        gy: dec(gy),
                        q: dec(c.order()),
                        map: c.map().id().into(),
                    }
                }),
                ca_public: b.ca_public.as_ref().map(PointWire::from),
                salt: b.salt.map(dec),
            },
            classes: b
                .classes
                .iter()
                .map(|(id, c)| ClassWire {
                    id: id.to_string(),
                    filter: c.filter.as_ref().and_then(|f| {
                        let coeffs = f.coeffs();
                        (!f.is_zero())
                            .then(|| coeffs[..coeffs.len() - 1].iter().map(|v| dec(*v)).collect())
                    }),
                    public_key: c.public_key.as_ref().map(PointWire::from),
                    base: c.base.map(dec),
                    shift: c.shift,
                    exponent: c.exponent.as_ref().map(|t| t.to_string()),
                })
                .collect(),
            edges: b
                .hierarchy
                .edges()
                .map(|(hi, lo)| (hi.to_string(), lo.to_string()))
                .collect(),
        }
    }
}

impl BoardWire {
    fn into_board(self) -> Result<PublicBoard, BoardError> {
        let scheme: Scheme = self
            .scheme
            .parse()
            .map_err(|e: SchemeError| field_err("scheme", e))?;
        let p = parse_u64("params.p", &self.params.p)?;
        let curve = match &self.params.curve {
            None => None,
            Some(cw) => {
                let get = |name: &str, v: &str| parse_u64(&format!("params.curve.{name}"), v);
                let curve = CurveContext::new(
                    get("p", &cw.p)?,
                    get("a", &cw.a)?,
                    get("b", &cw.b)?,
                    get("gx", &cw.gx)?,
                    get("gy", &cw.gy)?,
                    get("q", &cw.q)?,
                )
                .map_err(|e| field_err("params.curve", e))?;
                let map = PointMap::from_id(&cw.map).map_err(|e| field_err("params.curve.map", e))?;
                Some(curve.with_map(map))
            }
        };
        let base = parse_opt("params.base", &self.params.base)?.unwrap_or(10);
        let params = SchemeParams::new(scheme, p, curve, base).map_err(|e| field_err("params", e))?;
        let ca_public = self
            .params
            .ca_public
            .as_ref()
            .map(|w| w.to_point("params.ca_public"))
            .transpose()?;
        let salt = parse_opt("params.salt", &self.params.salt)?;

        let mut classes = BTreeMap::new();
        for (i, cw) in self.classes.iter().enumerate() {
            let at = |f: &str| format!("classes[{i}].{f}");
            let filter = if scheme.has_filters() {
                let poly = match &cw.filter {
                    None => Poly::zero(p),
                    Some(coeffs) => {
                        let mut values = Vec::with_capacity(coeffs.len() + 1);
                        for (j, c) in coeffs.iter().enumerate() {
                            let v = parse_u64(&at(&format!("filter[{j}]")), c)?;
                            if v >= p {
                                return Err(field_err(at(&format!("filter[{j}]")), "not below p"));
                            }
                            values.push(v);
                        }
                        values.push(1);
                        Poly::from_coeffs(values, p)
                    }
                };
                Some(poly)
            } else {
                None
            };
            let exponent = cw
                .exponent
                .as_deref()
                .map(|t| t.parse::<BigUint>().map_err(|e| field_err(at("exponent"), e)))
                .transpose()?;
            let public = PublicClass {
                public_key: cw
                    .public_key
                    .as_ref()
                    .map(|w| w.to_point(&at("public_key")))
                    .transpose()?,
                base: parse_opt(&at("base"), &cw.base)?,
                shift: cw.shift,
                exponent,
                filter,
            };
            if classes.insert(ClassId::from(cw.id.as_str()), public).is_some() {
                return Err(field_err(at("id"), "duplicate class id"));
            }
        }
        let hierarchy = Hierarchy::from_edges(
            classes.keys().cloned(),
            self.edges
                .iter()
                .map(|(hi, lo)| (ClassId::from(hi.as_str()), ClassId::from(lo.as_str()))),
        )
        .map_err(|e| field_err("edges", e))?;
        Ok(PublicBoard {
            epoch: parse_u64("epoch", &self.epoch)?,
            params,
            hierarchy,
            ca_public,
            salt,
            classes,
        })
    }
}

impl From<&CaSecrets> for SecretsWire {
    fn from(s: &CaSecrets) -> Self {
        SecretsWire {
            version: FORMAT_VERSION,
            ca_secret: s.ca_secret.map(dec),
            akl_root: s.akl_root.map(dec),
            rng: RngWire {
                seed: hex::encode(s.rng.get_seed()),
                word_pos: s.rng.get_word_pos().to_string(),
            },
            classes: s
                .classes
                .iter()
                .map(|(id, c)| {
                    let (n, sv) = match c.secret {
                        ClassSecret::Curve(n) => (Some(dec(n)), None),
                        ClassSecret::Exponent(v) => (None, Some(dec(v))),
                        ClassSecret::Assigned => (None, None),
                    };
                    ClassSecretWire {
                        id: id.to_string(),
                        key: dec(c.key),
                        n,
                        s: sv,
                        h: c.filter_secret.map(dec),
                    }
                })
                .collect(),
        }
    }
}

impl SecretsWire {
    fn into_secrets(self) -> Result<CaSecrets, BoardError> {
        use rand::SeedableRng;
        let seed_bytes = hex::decode(&self.rng.seed).map_err(|e| field_err("rng.seed", e))?;
        let seed: [u8; 32] = seed_bytes
            .try_into()
            .map_err(|_| field_err("rng.seed", "expected 32 bytes"))?;
        let word_pos: u128 = self
            .rng
            .word_pos
            .parse()
            .map_err(|e| field_err("rng.word_pos", e))?;
        let mut rng = ChaCha20Rng::from_seed(seed);
        rng.set_word_pos(word_pos);

        let mut classes = BTreeMap::new();
        for (i, cw) in self.classes.iter().enumerate() {
            let at = |f: &str| format!("classes[{i}].{f}");
            let secret = match (parse_opt(&at("n"), &cw.n)?, parse_opt(&at("s"), &cw.s)?) {
                (Some(n), None) => ClassSecret::Curve(n),
                (None, Some(s)) => ClassSecret::Exponent(s),
                (None, None) => ClassSecret::Assigned,
                (Some(_), Some(_)) => return Err(field_err(at("n"), "both n and s present")),
            };
            let entry = ClassSecrets {
                key: parse_u64(&at("key"), &cw.key)?,
                secret,
                filter_secret: parse_opt(&at("h"), &cw.h)?,
            };
            if classes.insert(ClassId::from(cw.id.as_str()), entry).is_some() {
                return Err(field_err(at("id"), "duplicate class id"));
            }
        }
        Ok(CaSecrets {
            ca_secret: parse_opt("ca_secret", &self.ca_secret)?,
            akl_root: parse_opt("akl_root", &self.akl_root)?,
            classes,
            rng,
        })
    }
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BoardError + '_ {
    move |source| BoardError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `contents` through a temporary file in the same directory and
/// renames it over `path`.
fn atomic_write(path: &Path, contents: &str, private: bool) -> Result<(), BoardError> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        let mode = if private { 0o600 } else { 0o644 };
        fs::set_permissions(tmp.path(), fs::Permissions::from_mode(mode)).map_err(io_err(path))?;
    }
    #[cfg(not(unix))]
    let _ = private;
    tmp.write_all(contents.as_bytes()).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| BoardError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

pub fn save_board(path: &Path, board: &PublicBoard) -> Result<(), BoardError> {
    atomic_write(path, &board.to_json()?, false)
}

pub fn load_board(path: &Path) -> Result<PublicBoard, BoardError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    PublicBoard::from_json(&text)
}

/// Written with mode 0600 on unix.
pub fn save_secrets(path: &Path, secrets: &CaSecrets) -> Result<(), BoardError> {
    atomic_write(path, &secrets.to_json()?, true)
}

pub fn load_secrets(path: &Path) -> Result<CaSecrets, BoardError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    CaSecrets::from_json(&text)
}

/// A state directory holding the current board, the secret store and one
/// board snapshot per epoch.
#[derive(Debug, Clone)]
pub struct BoardStore {
    root: PathBuf,
}

impl BoardStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn board_path(&self) -> PathBuf {
        self.root.join(BOARD_FILE)
    }

    pub fn secrets_path(&self) -> PathBuf {
        self.root.join(SECRETS_FILE)
    }

    pub fn epoch_path(&self, epoch: u64) -> PathBuf {
        self.root.join(EPOCH_DIR).join(format!("board-{epoch:06}.json"))
    }

    pub fn exists(&self) -> bool {
        self.board_path().exists()
    }

    /// Writes the snapshot first so the current board never points at a
    /// missing epoch.
    pub fn save(&self, board: &PublicBoard, secrets: &CaSecrets) -> Result<(), BoardError> {
        save_board(&self.epoch_path(board.epoch), board)?;
        save_secrets(&self.secrets_path(), secrets)?;
        save_board(&self.board_path(), board)
    }

    pub fn load(&self) -> Result<(PublicBoard, CaSecrets), BoardError> {
        Ok((
            load_board(&self.board_path())?,
            load_secrets(&self.secrets_path())?,
        ))
    }

    pub fn load_epoch(&self, epoch: u64) -> Result<PublicBoard, BoardError> {
        let path = self.epoch_path(epoch);
        if !path.exists() {
            return Err(BoardError::UnknownEpoch(epoch));
        }
        load_board(&path)
    }
}

// ---------------------------------------------------------------------------
// Epoch diffs
// ---------------------------------------------------------------------------

/// How one class's published filter differs between two epochs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FilterChange {
    Added { new: Poly },
    Removed { old: Poly },
    Changed { old: Poly, new: Poly },
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BoardDiff {
    pub changes: BTreeMap<ClassId, FilterChange>,
}

impl BoardDiff {
    pub fn is_empty(&self) -> bool {
        self.changes.is_empty()
    }

    pub fn changed(&self) -> Vec<ClassId> {
        self.select(|c| matches!(c, FilterChange::Changed { .. }))
    }

    pub fn added(&self) -> Vec<ClassId> {
        self.select(|c| matches!(c, FilterChange::Added { .. }))
    }

    pub fn removed(&self) -> Vec<ClassId> {
        self.select(|c| matches!(c, FilterChange::Removed { .. }))
    }

    fn select(&self, pred: impl Fn(&FilterChange) -> bool) -> Vec<ClassId> {
        self.changes
            .iter()
            .filter(|(_, c)| pred(c))
            .map(|(id, _)| id.clone())
            .collect()
    }
}

/// Classes whose published filter differs between `old` and `new`.
pub fn diff_epochs(old: &PublicBoard, new: &PublicBoard) -> Result<BoardDiff, BoardError> {
    if old.params.scheme != new.params.scheme {
        return Err(BoardError::SchemeMismatch(format!(
            "scheme {} vs {}",
            old.params.scheme, new.params.scheme
        )));
    }
    if old.params.p() != new.params.p() {
        return Err(BoardError::SchemeMismatch(format!(
            "modulus {} vs {}",
            old.params.p(),
            new.params.p()
        )));
    }
    let mut diff = BoardDiff::default();
    let ids: std::collections::BTreeSet<&ClassId> =
        old.classes.keys().chain(new.classes.keys()).collect();
    for id in ids {
        let before = old.classes.get(id);
        let after = new.classes.get(id);
        let change = match (before, after) {
            (None, Some(n)) => n.filter.clone().map(|new| FilterChange::Added { new }),
            (Some(o), None) => o.filter.clone().map(|old| FilterChange::Removed { old }),
            (Some(o), Some(n)) => {
                let (of, nf) = (o.filter.as_ref(), n.filter.as_ref());
                match (of, nf) {
                    (Some(a), Some(b)) if a != b => Some(FilterChange::Changed {
                        old: a.clone(),
                        new: b.clone(),
                    }),
                    _ => None,
                }
            }
            (None, None) => None,
        };
        if let Some(c) = change {
            diff.changes.insert(id.clone(), c);
        }
    }
    Ok(diff)
}
