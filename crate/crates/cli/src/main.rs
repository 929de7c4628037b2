use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hierkey::board::BoardStore;
use hierkey::{
    attack_boards, AttackKind, Authority, ClassId, CurveContext, Point, Scheme, SchemeParams,
};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

mod demo;

#[derive(Parser)]
#[command(name = "hierkey", version, about = "Hierarchical key assignment with secure filters")]
struct Cli {
    /// State directory holding board.json, ca_secrets.json and epochs/.
    #[arg(long, global = true, env = "HIERKEY_HOME", default_value = ".hierkey")]
    home: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create a new CA with an empty hierarchy.
    Init(InitArgs),
    /// Enroll or remove security classes.
    #[command(subcommand)]
    Class(ClassCommand),
    /// Derive a class key the way a predecessor would.
    Derive {
        #[arg(long = "as")]
        viewer: String,
        #[arg(long)]
        target: String,
        /// Compare against the CA store and fail on mismatch.
        #[arg(long)]
        verify: bool,
    },
    /// Inspect the public board.
    #[command(subcommand)]
    Board(BoardCommand),
    /// Run an attack on one class across two published epochs.
    Attack {
        kind: AttackArg,
        #[arg(long)]
        class: String,
        /// Two epochs, old then new, e.g. `1,2`.
        #[arg(long, value_parser = parse_epochs)]
        epochs: (u64, u64),
    },
    /// Replay the worked examples end to end.
    #[command(subcommand)]
    Demo(DemoCommand),
    /// Inspect the CA secret store.
    #[command(subcommand)]
    Secrets(SecretsCommand),
}

#[derive(Args)]
struct InitArgs {
    #[arg(long, default_value = "m1")]
    scheme: Scheme,
    #[arg(long, default_value_t = 99991)]
    p: u64,
    /// Curve parameters `p,a,b,Gx,Gy,q`; searched over p when omitted.
    #[arg(long)]
    curve: Option<String>,
    /// Radix of the shift mask.
    #[arg(long, default_value_t = 10)]
    base: u64,
    /// RNG seed; random when omitted.
    #[arg(long)]
    seed: Option<u64>,
    /// Overwrite an existing state directory.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum ClassCommand {
    Add {
        id: String,
        /// A class directly above the new one. Repeatable.
        #[arg(long)]
        above: Vec<String>,
        /// A class directly below the new one. Repeatable.
        #[arg(long)]
        below: Vec<String>,
        /// Use this key instead of a random one.
        #[arg(long)]
        key: Option<u64>,
    },
    Remove {
        id: String,
    },
}

#[derive(Subcommand)]
enum BoardCommand {
    Show {
        #[arg(long)]
        epoch: Option<u64>,
    },
}

#[derive(Subcommand)]
enum DemoCommand {
    Paper {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum SecretsCommand {
    Show {
        #[arg(long)]
        unsafe_show_secrets: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AttackArg {
    Linhsu,
    Tp,
}

fn parse_epochs(s: &str) -> Result<(u64, u64), String> {
    let (a, b) = s.split_once(',').ok_or("expected two epochs as k1,k2")?;
    let num = |t: &str| t.trim().parse::<u64>().map_err(|e| format!("{t:?}: {e}"));
    Ok((num(a)?, num(b)?))
}

fn ids(names: &[String]) -> Vec<ClassId> {
    names.iter().map(|s| ClassId::from(s.as_str())).collect()
}

fn parse_curve(text: &str) -> Result<CurveContext> {
    let parts: Vec<u64> = text
        .split(',')
        .map(|s| s.trim().parse::<u64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("bad --curve {text:?}"))?;
    let [p, a, b, gx, gy, q] = parts[..] else {
        bail!("--curve takes six values p,a,b,Gx,Gy,q");
    };
    Ok(CurveContext::new(p, a, b, gx, gy, q)?)
}

fn load(store: &BoardStore) -> Result<Authority> {
    if !store.exists() {
        bail!("no CA in {}; run `hierkey init` first", store.root().display());
    }
    let (board, secrets) = store.load()?;
    Ok(Authority::from_parts(board, secrets)?)
}

fn init(store: &BoardStore, args: InitArgs) -> Result<()> {
    if store.exists() && !args.force {
        bail!("{} already holds a CA; pass --force to replace it", store.root().display());
    }
    let seed = args.seed.unwrap_or_else(rand::random);
    let curve = match (&args.curve, args.scheme.uses_curve()) {
        (Some(text), _) => Some(parse_curve(text)?),
        (None, true) => {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(1);
            Some(CurveContext::search(args.p, &mut rng)?)
        }
        (None, false) => None,
    };
    let params = SchemeParams::new(args.scheme, args.p, curve, args.base)?;
    let ca = Authority::new(params, seed)?;
    store.save(ca.board(), ca.secrets())?;
    println!(
        "initialised {} CA over p = {} (seed {seed})",
        ca.scheme(),
        ca.params().p()
    );
    if let Some(c) = &ca.params().curve {
        if let Point::Affine { x, y } = c.generator() {
            println!(
                "curve: y^2 = x^3 + {}x + {} over F_{}, G = ({x}, {y}), q = {}",
                c.a(),
                c.b(),
                c.p(),
                c.order()
            );
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let store = BoardStore::new(&cli.home);
    match cli.command {
        Command::Init(args) => init(&store, args)?,
        Command::Class(ClassCommand::Add {
            id,
            above,
            below,
            key,
        }) => {
            let mut ca = load(&store)?;
            let report = ca.insert_class(&ClassId::from(id.as_str()), &ids(&above), &ids(&below), key)?;
            store.save(ca.board(), ca.secrets())?;
            println!("epoch {}: added {id}", report.epoch);
            print_updates(&report);
        }
        Command::Class(ClassCommand::Remove { id }) => {
            let mut ca = load(&store)?;
            let report = ca.remove_class(&ClassId::from(id.as_str()))?;
            store.save(ca.board(), ca.secrets())?;
            println!("epoch {}: removed {id}", report.epoch);
            print_updates(&report);
        }
        Command::Derive {
            viewer,
            target,
            verify,
        } => {
            let ca = load(&store)?;
            let target_id = ClassId::from(target.as_str());
            let d = ca.derive(&ClassId::from(viewer.as_str()), &target_id)?;
            if d.authorized {
                println!("{viewer} derives K({target}) = {}", d.key);
            } else {
                println!("{viewer} is not above {target}; filter value {} is not a key", d.key);
            }
            if verify {
                if d.authorized && d.key == ca.key_of(&target_id)? {
                    println!("OK");
                } else {
                    bail!("verification failed: derived value differs from the CA store");
                }
            }
        }
        Command::Board(BoardCommand::Show { epoch }) => {
            let board = match epoch {
                Some(k) => store.load_epoch(k)?,
                None => load(&store)?.board().clone(),
            };
            print!("{}", board.to_json()?);
        }
        Command::Attack {
            kind,
            class,
            epochs,
        } => {
            let ca = load(&store)?;
            let (old, new) = (store.load_epoch(epochs.0)?, store.load_epoch(epochs.1)?);
            let kind = match kind {
                AttackArg::Linhsu => AttackKind::LinHsu,
                AttackArg::Tp => AttackKind::TripathyPaul,
            };
            let id = ClassId::from(class.as_str());
            let report = attack_boards(kind, &old, &new, &id)?;
            println!("{report}");
            match ca.key_of(&id) {
                Ok(key) if report.recovers(key) => println!("result: recovered K({class}) = {key}"),
                Ok(_) => println!("result: attack failed, no candidate equals K({class})"),
                Err(_) => println!("result: {class} no longer exists; cannot judge"),
            }
        }
        Command::Demo(DemoCommand::Paper { seed }) => {
            if !demo::paper(seed)? {
                bail!("demo checks failed");
            }
        }
        Command::Secrets(SecretsCommand::Show { unsafe_show_secrets }) => {
            if !unsafe_show_secrets {
                bail!("refusing to print CA secrets without --unsafe-show-secrets");
            }
            let ca = load(&store)?;
            print!("{}", ca.secrets().to_json()?);
        }
    }
    Ok(())
}

fn print_updates(report: &hierkey::UpdateReport) {
    if report.rebuilt_all {
        println!("all filters regenerated");
    } else if report.updated.is_empty() {
        println!("no existing filter changed");
    } else {
        let names: Vec<String> = report.updated.iter().map(|c| c.to_string()).collect();
        println!("updated filters: {}", names.join(", "));
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
