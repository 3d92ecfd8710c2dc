use std::io::{self, BufRead, Write};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use migp_core::client::{HttpTransport, MigpClient};
use migp_core::pipeline::BucketStore;
use migp_core::rate_limiter::HashKind;
use migp_core::server::{serve as serve_http, MigpServer};
use tracing::info;

use crate::config::{load_rules_arg, Config, HashChoice};
use crate::secrets::Secrets;
use crate::{init_logging, QueryArgs, ServeArgs};

fn expected_kind(choice: &HashChoice) -> HashKind {
    match choice {
        HashChoice::Fast => HashKind::Fast,
        HashChoice::Slow(_) => HashKind::SlowHash,
        HashChoice::Timelock { .. } => HashKind::Timelock,
        HashChoice::Salted(_) => HashKind::Salted,
    }
}

pub fn serve(a: &ServeArgs, level: Option<&str>) -> Result<u8> {
    let cfg = Config::load(&a.config)?;
    init_logging(level.or(cfg.log_level.as_deref()), "info");
    let store = BucketStore::load(&cfg.store)?;
    let h = store.header();
    if h.entry_mode != cfg.entry_mode {
        bail!("store uses entry mode {} but the config says {}", h.entry_mode.name(), cfg.entry_mode.name());
    }
    if h.prefix_bits != cfg.prefix_bits {
        bail!("store uses prefix_bits {} but the config says {}", h.prefix_bits, cfg.prefix_bits);
    }
    if h.hash.kind() != expected_kind(&cfg.hash) {
        bail!("store hash back-end does not match `hash = {}`", cfg.hash.name());
    }
    let key = Secrets::load(&cfg.key)?.key;
    let server = Arc::new(MigpServer::new(store, key, cfg.server_config())?);
    let addr = a.listen.unwrap_or(cfg.listen);
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        let local = listener.local_addr()?;
        info!(%local, "serving");
        println!("listening on http://{local}");
        io::stdout().flush()?;
        serve_http(server, listener, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
        Ok::<_, anyhow::Error>(())
    })?;
    Ok(0)
}

pub fn query(a: &QueryArgs) -> Result<u8> {
    let password = if a.password == "-" {
        let mut line = String::new();
        io::stdin().lock().read_line(&mut line)?;
        line.trim_end_matches(['\r', '\n']).to_owned()
    } else {
        a.password.clone()
    };
    let rules = load_rules_arg(&a.rules)?;
    let transport = HttpTransport::new(&a.endpoint, a.token.clone(), Duration::from_secs(a.timeout_secs));
    let client = MigpClient::new(Arc::new(transport), rules);
    let outcome = client.check(&a.username, &password, a.m)?;
    println!("{outcome}");
    Ok(outcome.exit_code() as u8)
}
