"""Identity harmonization and token service.

Many external credentials map onto one account; tokens carry the account's
unique identifier plus group claims and are signed with an HMAC-SHA256 tag
over a canonical JSON payload. Derived (translated) credentials are regular
tokens with a target-specific audience; they deliberately outlive revocation
of the token they were derived from, expiring only on their own schedule.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import json
from dataclasses import dataclass, field

from miniorc.errors import MiniorcError

TOKEN_TTL_SECONDS = 3600.0
TRANSLATION_TARGETS = ("shell_credential", "storage_credential")


class AlreadyLinked(MiniorcError):
    code = "ALREADY_LINKED"


class UnknownAccount(MiniorcError):
    code = "UNKNOWN_ACCOUNT"


class UnknownIdentity(MiniorcError):
    code = "UNKNOWN_IDENTITY"


class AccountDisabled(MiniorcError):
    code = "ACCOUNT_DISABLED"


class UnknownAudience(MiniorcError):
    code = "UNKNOWN_AUDIENCE"


class DuplicateClient(MiniorcError):
    code = "DUPLICATE_CLIENT"


class Forbidden(MiniorcError):
    code = "FORBIDDEN"


class InvalidToken(MiniorcError):
    code = "AUTH_INVALID"


@dataclass(frozen=True)
class ExternalIdentity:
    issuer: str
    subject: str
    kind: str = "oidc"  # oidc | saml | x509 (opaque labels)

    @property
    def key(self) -> tuple[str, str]:
        return (self.issuer, self.subject)

    def to_payload(self) -> dict:
        return {"issuer": self.issuer, "subject": self.subject, "kind": self.kind}


@dataclass
class Account:
    account_id: str
    linked: list = field(default_factory=list)  # of ExternalIdentity
    groups: set = field(default_factory=set)
    enabled: bool = True

    def to_payload(self) -> dict:
        return {
            "account_id": self.account_id,
            "linked": [e.to_payload() for e in self.linked],
            "groups": sorted(self.groups),
            "enabled": self.enabled,
        }


@dataclass(frozen=True)
class Introspection:
    active: bool
    reason: str | None = None
    account_id: str | None = None
    groups: tuple = ()
    audience: str | None = None
    token_id: str | None = None
    expires_at: float | None = None

    def to_payload(self) -> dict:
        payload: dict = {"active": self.active}
        if self.active:
            payload.update(
                account_id=self.account_id,
                groups=list(self.groups),
                audience=self.audience,
                token_id=self.token_id,
                expires_at=self.expires_at,
            )
        else:
            payload["reason"] = self.reason
        return payload


def _b64(data: bytes) -> str:
    return base64.urlsafe_b64encode(data).decode("ascii").rstrip("=")


def _unb64(text: str) -> bytes:
    padding = "=" * (-len(text) % 4)
    return base64.urlsafe_b64decode(text + padding)


class IdentityService:
    def __init__(self, secret: str = "miniorc-dev-secret", admin_group: str = "admin"):
        self._secret = secret.encode("utf-8")
        self._admin_group = admin_group
        self._accounts: dict[str, Account] = {}
        self._by_identity: dict[tuple[str, str], str] = {}
        self._clients: dict[str, str] = {}  # audience -> client_id
        self._revoked: set[str] = set()
        self._account_counter = 0
        self._token_counter = 0
        self._client_counter = 0

    # -- accounts and linking ------------------------------------------------

    def link_credential(self, ext: ExternalIdentity, account_id: str | None = None) -> str:
        existing = self._by_identity.get(ext.key)
        if existing is not None:
            if account_id is None or account_id == existing:
                return existing
            raise AlreadyLinked(
                f"identity {ext.issuer}/{ext.subject} already linked to {existing}"
            )
        if account_id is None:
            self._account_counter += 1
            account_id = f"acct-{self._account_counter:04d}"
            self._accounts[account_id] = Account(account_id=account_id)
        account = self._accounts.get(account_id)
        if account is None:
            raise UnknownAccount(f"no account {account_id!r}")
        account.linked.append(ext)
        self._by_identity[ext.key] = account_id
        return account_id

    def account_of(self, ext: ExternalIdentity) -> str | None:
        return self._by_identity.get(ext.key)

    def get_account(self, account_id: str) -> Account:
        account = self._accounts.get(account_id)
        if account is None:
            raise UnknownAccount(f"no account {account_id!r}")
        return account

    def set_groups(self, account_id: str, groups) -> None:
        self.get_account(account_id).groups = set(groups)

    def set_enabled(self, account_id: str, enabled: bool) -> None:
        self.get_account(account_id).enabled = enabled

    # -- clients ---------------------------------------------------------------

    def register_client(self, audience: str) -> dict:
        if audience in self._clients:
            raise DuplicateClient(f"client {audience!r} already registered")
        self._client_counter += 1
        client_id = f"client-{self._client_counter:04d}"
        self._clients[audience] = client_id
        return {"audience": audience, "client_id": client_id}

    # -- tokens ------------------------------------------------------------------

    def _sign(self, payload_b64: str) -> str:
        return hmac.new(self._secret, payload_b64.encode("ascii"), hashlib.sha256).hexdigest()

    def _mint(self, account: Account, audience: str, now: float, kind: str) -> str:
        self._token_counter += 1
        claims = {
            "token_id": f"tok-{self._token_counter:06d}",
            "account_id": account.account_id,
            "groups": sorted(account.groups),
            "issued_at": now,
            "expires_at": now + TOKEN_TTL_SECONDS,
            "audience": audience,
            "kind": kind,
        }
        payload_b64 = _b64(json.dumps(claims, sort_keys=True, separators=(",", ":")).encode())
        return f"{payload_b64}.{self._sign(payload_b64)}"

    def authenticate(self, ext: ExternalIdentity, audience: str, now: float) -> str:
        if audience not in self._clients:
            raise UnknownAudience(f"audience {audience!r} is not a registered client")
        account_id = self._by_identity.get(ext.key)
        if account_id is None:
            raise UnknownIdentity(f"identity {ext.issuer}/{ext.subject} is not linked")
        account = self._accounts[account_id]
        if not account.enabled:
            raise AccountDisabled(f"account {account_id} is disabled")
        return self._mint(account, audience, now, kind="bearer")

    def login(self, ext: ExternalIdentity, audience: str, now: float) -> tuple[str, str]:
        """Authenticate, auto-provisioning a fresh account on first sight."""
        if self._by_identity.get(ext.key) is None:
            self.link_credential(ext)
        token = self.authenticate(ext, audience, now)
        return self._by_identity[ext.key], token

    def introspect(self, token_text: str, now: float) -> Introspection:
        try:
            payload_b64, signature = token_text.split(".")
        except (ValueError, AttributeError):
            return Introspection(active=False, reason="malformed")
        if not hmac.compare_digest(self._sign(payload_b64), signature):
            return Introspection(active=False, reason="signature")
        try:
            claims = json.loads(_unb64(payload_b64))
        except (ValueError, UnicodeDecodeError):
            return Introspection(active=False, reason="malformed")
        if now > claims["expires_at"]:
            return Introspection(active=False, reason="expired")
        if claims["token_id"] in self._revoked:
            return Introspection(active=False, reason="revoked")
        return Introspection(
            active=True,
            account_id=claims["account_id"],
            groups=tuple(claims["groups"]),
            audience=claims["audience"],
            token_id=claims["token_id"],
            expires_at=claims["expires_at"],
        )

    def require(self, token_text: str, now: float) -> Introspection:
        result = self.introspect(token_text, now)
        if not result.active:
            raise InvalidToken(f"token rejected: {result.reason}")
        return result

    def revoke(self, token_id: str) -> None:
        self._revoked.add(token_id)

    def translate_token(self, token_text: str, target: str, now: float) -> str:
        if target not in TRANSLATION_TARGETS:
            raise MiniorcError(
                f"unknown translation target {target!r}", code="UNKNOWN_TARGET_SERVICE"
            )
        claims = self.require(token_text, now)
        account = self.get_account(claims.account_id)
        # Derived credential stands on its own: revoking the source later
        # does not invalidate it before its own expiry.
        return self._mint(account, target, now, kind="derived")

    def issue_credential(self, account_id: str, target: str, now: float) -> str:
        """Platform-initiated derived credential (admin access on endpoints)."""
        if target not in TRANSLATION_TARGETS:
            raise MiniorcError(
                f"unknown translation target {target!r}", code="UNKNOWN_TARGET_SERVICE"
            )
        account = self.get_account(account_id)
        if not account.enabled:
            raise AccountDisabled(f"account {account_id} is disabled")
        return self._mint(account, target, now, kind="derived")

    # -- provisioning listings -----------------------------------------------

    def _require_admin(self, token_text: str, now: float) -> Introspection:
        claims = self.require(token_text, now)
        if self._admin_group not in claims.groups:
            raise Forbidden(f"listing requires the {self._admin_group!r} group")
        return claims

    def list_users(
        self,
        token_text: str,
        now: float,
        *,
        contains: str | None = None,
        page: int = 1,
        page_size: int = 50,
    ) -> dict:
        self._require_admin(token_text, now)
        accounts = [self._accounts[k] for k in sorted(self._accounts)]
        if contains:
            accounts = [
                a
                for a in accounts
                if contains in a.account_id
                or any(contains in e.subject for e in a.linked)
            ]
        total = len(accounts)
        start = (page - 1) * page_size
        chunk = accounts[start : start + page_size]
        return {
            "total": total,
            "page": page,
            "page_size": page_size,
            "users": [a.to_payload() for a in chunk],
        }

    def list_groups(self, token_text: str, now: float) -> dict:
        self._require_admin(token_text, now)
        groups: dict[str, int] = {}
        for account in self._accounts.values():
            for group in account.groups:
                groups[group] = groups.get(group, 0) + 1
        return {"groups": [{"name": g, "members": groups[g]} for g in sorted(groups)]}

    # -- persistence ------------------------------------------------------------

    def to_state(self) -> dict:
        return {
            "accounts": [self._accounts[k].to_payload() for k in sorted(self._accounts)],
            "clients": dict(sorted(self._clients.items())),
            "revoked": sorted(self._revoked),
            "account_counter": self._account_counter,
            "token_counter": self._token_counter,
            "client_counter": self._client_counter,
        }

    def restore(self, state: dict) -> None:
        self._accounts = {}
        self._by_identity = {}
        for payload in state.get("accounts", []):
            account = Account(
                account_id=payload["account_id"],
                linked=[ExternalIdentity(**e) for e in payload.get("linked", [])],
                groups=set(payload.get("groups", [])),
                enabled=payload.get("enabled", True),
            )
            self._accounts[account.account_id] = account
            for ext in account.linked:
                self._by_identity[ext.key] = account.account_id
        self._clients = dict(state.get("clients", {}))
        self._revoked = set(state.get("revoked", []))
        self._account_counter = int(state.get("account_counter", 0))
        self._token_counter = int(state.get("token_counter", 0))
        self._client_counter = int(state.get("client_counter", 0))
