//! The `ito` command line.
//!
//! Mutating subcommands apply one command directly to the ledger file and
//! exit; use `serve` and the HTTP interface when several clients share a
//! ledger. Every subcommand accepts `--format json` for machine-readable
//! output. Errors go to stderr with a nonzero exit status.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use ito_core::auction::Side;
use ito_core::incentives::PerformanceEvent;
use ito_core::ledger::{read_committed, verify_committed};
use ito_core::policy::{InflationRecipient, SpendingDomains, TokenDefinition};
use ito_core::{AccountId, Amount, Command, Fraction, Outcome, Price, VerificationReport};
use ito_sim::config::{ScenarioConfig, ScenarioKind};
use serde::Serialize;

use crate::config::GatewayConfig;
use crate::{open_exchange, GatewayError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "ito", version, about = "Sponsored-token exchange: ledger, call auctions, policies and simulations")]
pub struct Cli {
    /// Gateway configuration file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Ledger file, overriding the configuration.
    #[arg(long, global = true)]
    pub ledger: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "text")]
    pub format: Format,
    /// Idempotency key for the command.
    #[arg(long, global = true)]
    pub key: Option<String>,
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    Buy,
    Sell,
}

impl From<SideArg> for Side {
    fn from(s: SideArg) -> Side {
        match s {
            SideArg::Buy => Side::Buy,
            SideArg::Sell => Side::Sell,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Create an empty ledger, optionally issuing the quote currency.
    Init {
        #[arg(long)]
        quote: Option<String>,
        #[arg(long, default_value = "treasury")]
        treasury: String,
        #[arg(long, default_value = "1000000")]
        supply: Amount,
    },
    /// Initial token offering against posted collateral.
    Issue {
        #[arg(long)]
        token: String,
        #[arg(long)]
        sponsor: String,
        #[arg(long)]
        supply: Amount,
        #[arg(long)]
        price: Price,
        #[arg(long)]
        collateral: Amount,
        /// Supply growth per policy period.
        #[arg(long, default_value = "0.01")]
        inflation: Fraction,
        /// Comma-separated spending categories; all categories if omitted.
        #[arg(long, value_delimiter = ',')]
        domains: Vec<String>,
        #[arg(long)]
        band: Option<Fraction>,
        #[arg(long)]
        min_reserve_rate: Option<Fraction>,
        #[arg(long)]
        max_round_move: Option<Fraction>,
        #[arg(long)]
        stalled_rounds: Option<u32>,
    },
    /// Submit a limit order to the open round.
    Order {
        #[arg(long)]
        account: String,
        #[arg(long)]
        token: String,
        #[arg(long, value_enum)]
        side: SideArg,
        #[arg(long)]
        quantity: Amount,
        #[arg(long)]
        price: Price,
        #[arg(long)]
        id: Option<String>,
    },
    /// Clear the open round of a token.
    Clear {
        #[arg(long)]
        token: String,
    },
    /// Set the sponsor's commanding price for the next round.
    CommandPrice {
        #[arg(long)]
        token: String,
        #[arg(long)]
        price: Price,
    },
    /// Advance one policy period: inflation, then any due redistribution.
    PolicyTick,
    /// Move tokens; with --category the transfer is a purchase checked
    /// against the token's spending domains.
    Transfer {
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long)]
        token: String,
        #[arg(long)]
        amount: Amount,
        #[arg(long)]
        category: Option<String>,
    },
    /// Record a sale or a design milestone and grant incentive tokens.
    Perform {
        #[arg(long)]
        grantee: String,
        #[arg(long, conflicts_with = "milestone")]
        sale: Option<Amount>,
        #[arg(long)]
        milestone: Option<String>,
    },
    /// Apply any command given as tagged JSON.
    Exec {
        #[arg(long)]
        json: String,
    },
    /// Check framing, hash links, the head sidecar and replay.
    VerifyLedger,
    /// Write committed entries as JSON lines.
    ExportLedger {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario and write its CSV.
    Simulate {
        /// market, bubble or growth-gap.
        #[arg(long, default_value = "market")]
        preset: String,
        /// Scenario file (TOML), instead of a preset.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP interface until interrupted.
    Serve {
        #[arg(long)]
        listen: Option<String>,
    },
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    let format = cli.format;
    match execute(cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = match format {
                Format::Text => writeln!(err, "error: {e}"),
                Format::Json => writeln!(err, "{}", serde_json::json!({ "error": e.code(), "message": e.to_string() })),
            };
            1
        }
    }
}

fn load_config(cli: &Cli) -> Result<GatewayConfig, GatewayError> {
    let mut cfg = match &cli.config {
        Some(p) => GatewayConfig::load(p)?,
        None => GatewayConfig::default(),
    };
    if let Some(l) = &cli.ledger {
        cfg.ledger = l.clone();
    }
    Ok(cfg)
}

fn emit<T: Serialize>(out: &mut dyn Write, format: Format, value: &T, text: impl FnOnce() -> String) -> Result<(), GatewayError> {
    match format {
        Format::Json => writeln!(out, "{}", serde_json::to_string(value).expect("serializable output"))?,
        Format::Text => writeln!(out, "{}", text())?,
    }
    Ok(())
}

fn describe(outcome: &Outcome) -> String {
    match outcome {
        Outcome::Issued { token, reserve_rate: Some(r) } => format!("issued {token}, reserve rate {r}"),
        Outcome::Issued { token, reserve_rate: None } => format!("issued {token}"),
        Outcome::Transferred { token, amount } => format!("transferred {amount} {token}"),
        Outcome::SpendDenied { token, category } => format!("denied: {token} cannot be spent on {category}"),
        Outcome::OrderAccepted { order } => {
            format!("accepted order {} (round {}, arrival {})", order.order_id, order.round, order.arrival)
        }
        Outcome::Cleared { result, sponsor_fills, .. } => match result.clearing_price {
            Some(p) => format!(
                "round {} cleared at {p}, volume {}, {} sponsor fills, next reference {}",
                result.round,
                result.matched_volume,
                sponsor_fills.len(),
                result.reference_price_next
            ),
            None => format!("round {} did not cross, next reference {}", result.round, result.reference_price_next),
        },
        Outcome::CommandingPriceAccepted { token, round, price, trigger } => {
            format!("commanding price {price} accepted for {token} round {round} ({trigger:?})")
        }
        Outcome::PeriodApplied { period, inflation, redistribution } => format!(
            "period {period}: {} inflation mints, {} redistributions",
            inflation.len(),
            redistribution.len()
        ),
        Outcome::Granted { grant } => format!("granted {} {} to {}", grant.amount, grant.token, grant.grantee),
        Outcome::GrowthDistributed { token, payouts } => format!("distributed {token} growth to {} holders", payouts.len()),
        Outcome::Duplicate { key } => format!("duplicate: {key} was already applied"),
    }
}

fn apply(cli: &Cli, out: &mut dyn Write, command: Command) -> Result<i32, GatewayError> {
    let cfg = load_config(cli)?;
    let mut ex = open_exchange(&cfg)?;
    let receipt = ex.execute(cli.key.as_deref(), &command)?;
    emit(out, cli.format, &receipt, || describe(&receipt.outcome))?;
    Ok(0)
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<i32, GatewayError> {
    let acct = |s: &str| AccountId::new(s);
    match &cli.command {
        Cmd::Init { quote, treasury, supply } => {
            let cfg = load_config(&cli)?;
            if std::fs::metadata(&cfg.ledger).is_ok_and(|m| m.len() > 0) {
                return Err(GatewayError::Usage(format!("{} already holds a ledger", cfg.ledger.display())));
            }
            let mut ex = open_exchange(&cfg)?;
            if let Some(q) = quote {
                ex.execute(
                    cli.key.as_deref(),
                    &Command::IssueQuote { token: q.as_str().into(), treasury: acct(treasury), supply: *supply },
                )?;
            }
            let report = VerificationReport::Ok { entries: ex.ledger().len() as u64, head: ex.ledger().head() };
            emit(out, cli.format, &report, || format!("initialized {}", cfg.ledger.display()))?;
            Ok(0)
        }
        Cmd::Issue {
            token,
            sponsor,
            supply,
            price,
            collateral,
            inflation,
            domains,
            band,
            min_reserve_rate,
            max_round_move,
            stalled_rounds,
        } => {
            let cfg = load_config(&cli)?;
            let mut policy = cfg.sponsor;
            if let Some(b) = band {
                policy.band = *b;
            }
            if min_reserve_rate.is_some() {
                policy.min_reserve_rate = *min_reserve_rate;
            }
            if max_round_move.is_some() {
                policy.max_round_move = *max_round_move;
            }
            if stalled_rounds.is_some() {
                policy.stalled_rounds = *stalled_rounds;
            }
            let definition = TokenDefinition {
                id: token.as_str().into(),
                inflation_rate: *inflation,
                inflation_recipient: InflationRecipient::Sponsor,
                redistribution: None,
                spending_domains: if domains.is_empty() {
                    SpendingDomains::Universal
                } else {
                    SpendingDomains::only(domains.iter().map(String::as_str))
                },
                vesting_class: None,
            };
            apply(
                &cli,
                out,
                Command::IssueToken {
                    definition,
                    sponsor: acct(sponsor),
                    supply: *supply,
                    issue_price: *price,
                    collateral: *collateral,
                    policy,
                },
            )
        }
        Cmd::Order { account, token, side, quantity, price, id } => apply(
            &cli,
            out,
            Command::SubmitOrder {
                order_id: id.as_deref().map(Into::into),
                account: acct(account),
                token: token.as_str().into(),
                side: (*side).into(),
                quantity: *quantity,
                limit_price: *price,
            },
        ),
        Cmd::Clear { token } => apply(&cli, out, Command::TriggerClear { token: token.as_str().into() }),
        Cmd::CommandPrice { token, price } => {
            apply(&cli, out, Command::SetCommandingPrice { token: token.as_str().into(), price: *price })
        }
        Cmd::PolicyTick => apply(&cli, out, Command::ApplyPolicyPeriod),
        Cmd::Transfer { from, to, token, amount, category } => apply(
            &cli,
            out,
            Command::Transfer {
                from: acct(from),
                to: acct(to),
                token: token.as_str().into(),
                amount: *amount,
                category: category.clone(),
            },
        ),
        Cmd::Perform { grantee, sale, milestone } => {
            let event = match (sale, milestone) {
                (Some(notional), None) => PerformanceEvent::Sale { notional: *notional },
                (None, Some(m)) => PerformanceEvent::Design { milestone: m.clone() },
                _ => return Err(GatewayError::Usage("give exactly one of --sale or --milestone".into())),
            };
            apply(&cli, out, Command::RecordPerformance { grantee: acct(grantee), event })
        }
        Cmd::Exec { json } => {
            let command: Command =
                serde_json::from_str(json).map_err(|e| GatewayError::Usage(format!("invalid command JSON: {e}")))?;
            apply(&cli, out, command)
        }
        Cmd::VerifyLedger => {
            let cfg = load_config(&cli)?;
            let report = verify_committed(&cfg.ledger)?;
            emit(out, cli.format, &report, || match &report {
                VerificationReport::Ok { entries, head } => format!("ok: {entries} entries, head {}", head.to_hex()),
                VerificationReport::Corrupt { .. } => String::new(),
            })?;
            match report {
                VerificationReport::Ok { .. } => Ok(0),
                VerificationReport::Corrupt { first_bad, reason } => Err(GatewayError::CorruptLedger { first_bad, reason }),
            }
        }
        Cmd::ExportLedger { out: path } => {
            let cfg = load_config(&cli)?;
            let (entries, _) = read_committed(&cfg.ledger)?;
            match path {
                Some(p) => {
                    let mut f = std::io::BufWriter::new(std::fs::File::create(p)?);
                    ito_core::ledger::export_jsonl(&entries, &mut f)?;
                    f.flush()?;
                }
                None => {
                    let mut buf = Vec::new();
                    ito_core::ledger::export_jsonl(&entries, &mut buf)?;
                    out.write_all(&buf)?;
                }
            }
            Ok(0)
        }
        Cmd::Simulate { preset, scenario, seed, out: path } => {
            let mut cfg = match scenario {
                Some(p) => ScenarioConfig::load(p)?,
                None => ScenarioConfig::preset(preset, 1)?,
            };
            if let Some(s) = seed {
                cfg.seed = *s;
            }
            let mut buf = Vec::new();
            match cli.format {
                Format::Text => ito_sim::run_scenario_csv(&cfg, &mut buf)?,
                Format::Json => {
                    let value = match cfg.kind {
                        ScenarioKind::Market => serde_json::to_value(ito_sim::run_market_scenario(&cfg)?),
                        ScenarioKind::Bubble => serde_json::to_value(ito_sim::run_bubble_scenario(&cfg)?),
                        ScenarioKind::GrowthGap => serde_json::to_value(ito_sim::growth_gap(
                            cfg.asset_growth * 100.0,
                            cfg.gdp_growth * 100.0,
                            cfg.horizon,
                        )?),
                    }
                    .expect("metrics serialize");
                    writeln!(buf, "{value}")?;
                }
            }
            match path {
                Some(p) => std::fs::write(p, &buf)?,
                None => out.write_all(&buf)?,
            }
            Ok(0)
        }
        Cmd::Serve { listen } => {
            let mut cfg = load_config(&cli)?;
            if let Some(l) = listen {
                cfg.listen = l.clone();
            }
            let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            let ledger = cfg.ledger.clone();
            let format = cli.format;
            runtime.block_on(crate::serve(cfg, |addr| {
                // Printed straight to stdout so supervisors can find the port.
                let mut stdout = std::io::stdout();
                let _ = match format {
                    Format::Text => writeln!(stdout, "listening on {addr} (ledger {})", ledger.display()),
                    Format::Json => writeln!(stdout, "{}", serde_json::json!({ "listening": addr.to_string() })),
                };
                let _ = stdout.flush();
            }))?;
            Ok(0)
        }
    }
}
