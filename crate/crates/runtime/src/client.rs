//! Client side of the wire protocol over tokio-tungstenite.

use futures::{SinkExt, StreamExt};
use serde::Serialize;
use tokio::sync::mpsc;
use tokio::task::JoinHandle;
use tokio_tungstenite::tungstenite::Message;

use sally_core::protocol::messages::{Hello, Reject, Welcome};
use sally_core::protocol::{decode_envelope, encode_envelope_text, Envelope, IdGen, MessageType, Outbox};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("cannot connect to {url}: {reason}")]
    Connect { url: String, reason: String },
    #[error("rejected by broker: {0:?}")]
    Rejected(Reject),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("connection closed")]
    Closed,
}

/// A registered connection to the broker.
pub struct Client {
    welcome: Welcome,
    ids: IdGen,
    outgoing: mpsc::UnboundedSender<Message>,
    incoming: mpsc::UnboundedReceiver<Envelope>,
    reader: JoinHandle<()>,
    writer: JoinHandle<()>,
}

impl Client {
    /// Connects, says hello and waits for the welcome.
    pub async fn connect(url: &str, hello: &Hello) -> Result<Self, ClientError> {
        let (socket, _) = tokio_tungstenite::connect_async(url).await.map_err(|e| ClientError::Connect {
            url: url.to_string(),
            reason: e.to_string(),
        })?;
        let (mut sink, mut stream) = socket.split();

        let env = Envelope::new("hello", "", MessageType::Hello, hello).map_err(|e| ClientError::Protocol(e.to_string()))?;
        let text = encode_envelope_text(&env).map_err(|e| ClientError::Protocol(e.to_string()))?;
        sink.send(Message::text(text)).await.map_err(|_| ClientError::Closed)?;

        let welcome = loop {
            let frame = stream.next().await.ok_or(ClientError::Closed)?.map_err(|_| ClientError::Closed)?;
            let text = match frame {
                Message::Text(t) => t.to_string(),
                Message::Close(_) => return Err(ClientError::Closed),
                _ => continue,
            };
            let env = decode_envelope(text.as_bytes()).map_err(|e| ClientError::Protocol(e.to_string()))?;
            match env.kind {
                MessageType::Welcome => break env.payload_as::<Welcome>().map_err(|e| ClientError::Protocol(e.to_string()))?,
                MessageType::Reject => {
                    let r = env.payload_as::<Reject>().map_err(|e| ClientError::Protocol(e.to_string()))?;
                    return Err(ClientError::Rejected(r));
                }
                other => return Err(ClientError::Protocol(format!("expected sally.welcome, got {other}"))),
            }
        };

        let (out_tx, mut out_rx) = mpsc::unbounded_channel::<Message>();
        let writer = tokio::spawn(async move {
            while let Some(m) = out_rx.recv().await {
                let close = matches!(m, Message::Close(_));
                if sink.send(m).await.is_err() || close {
                    break;
                }
            }
        });
        let (in_tx, in_rx) = mpsc::unbounded_channel();
        let reader = tokio::spawn(async move {
            while let Some(Ok(frame)) = stream.next().await {
                let text = match frame {
                    Message::Text(t) => t.to_string(),
                    Message::Close(_) => break,
                    _ => continue,
                };
                match decode_envelope(text.as_bytes()) {
                    Ok(env) => {
                        if in_tx.send(env).is_err() {
                            break;
                        }
                    }
                    Err(e) => tracing::warn!(error = %e, "dropping undecodable frame"),
                }
            }
        });

        Ok(Self {
            ids: IdGen::new(welcome.client_id.clone()),
            welcome,
            outgoing: out_tx,
            incoming: in_rx,
            reader,
            writer,
        })
    }

    pub fn client_id(&self) -> &str {
        &self.welcome.client_id
    }

    pub fn welcome(&self) -> &Welcome {
        &self.welcome
    }

    pub fn ids(&self) -> &IdGen {
        &self.ids
    }

    /// An outbox stamped with this client's id.
    pub fn outbox(&self) -> Outbox<'_> {
        Outbox::new(&self.welcome.client_id, &self.ids)
    }

    pub fn send(&self, env: &Envelope) -> Result<(), ClientError> {
        let text = encode_envelope_text(env).map_err(|e| ClientError::Protocol(e.to_string()))?;
        self.send_raw(text)
    }

    /// Sends a frame as is, without encoding or checks.
    pub fn send_raw(&self, text: String) -> Result<(), ClientError> {
        self.outgoing.send(Message::text(text)).map_err(|_| ClientError::Closed)
    }

    pub fn send_all(&self, envs: impl IntoIterator<Item = Envelope>) -> Result<(), ClientError> {
        envs.into_iter().try_for_each(|e| self.send(&e))
    }

    /// Builds and sends one message; returns its id.
    pub fn request<P: Serialize>(
        &self,
        kind: MessageType,
        to: Option<&str>,
        payload: &P,
    ) -> Result<String, ClientError> {
        let mut out = self.outbox();
        let id = out.send(kind, to, None, payload);
        self.send_all(out.drain())?;
        Ok(id)
    }

    /// Next inbound envelope; `None` once the connection is gone.
    pub async fn recv(&mut self) -> Option<Envelope> {
        self.incoming.recv().await
    }

    /// Waits for the reply to `id`, skipping anything else.
    pub async fn reply_to(&mut self, id: &str) -> Option<Envelope> {
        while let Some(env) = self.recv().await {
            if env.corr.as_deref() == Some(id) {
                return Some(env);
            }
        }
        None
    }

    pub async fn close(mut self) {
        let _ = self.outgoing.send(Message::Close(None));
        let _ = (&mut self.writer).await;
    }
}

impl Drop for Client {
    fn drop(&mut self) {
        self.reader.abort();
    }
}
