"""The online collateral-maintenance policies.

Every policy exposes the same stepping interface: ``step(slot, tx)`` is
called once per slot, in order, with the arriving transaction or None,
and returns the decision taken.  ``finish(slot, terminal_flushes)`` runs
once after the last slot; wallet policies flush leftover committed
collateral only when asked (utility accounting), the threshold policy
always does.  Policies are deterministic given params and seed, and
support ``clone`` so exhaustive drivers can fork mid-run.

Wallet-model rules shared by the first-fit family: the transaction that
triggers a flush is discarded, never retried elsewhere, and arrivals
during an outage of the active wallet(s) are discarded as well.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

from .model import (
    ARRIVE,
    DISCARD,
    CollateralPool,
    EventTrace,
    InvalidParams,
    ModelParams,
    Transaction,
    WalletBank,
)


class OddWalletCount(InvalidParams):
    pass


class InvalidEta(InvalidParams):
    pass


@dataclass(frozen=True)
class PolicyDecision:
    """What a policy did in one slot.

    action is 'settle', 'discard', or None (no arrival); flushed lists
    wallet indices flushed this slot; flush_amount is the pool tranche
    if the pool flushed.
    """

    action: str | None
    wallet: int | None = None
    flushed: tuple[int, ...] = ()
    flush_amount: int | Fraction | None = None


NO_ARRIVAL = PolicyDecision(None)


class FlushAllPolicy:
    """First fit into wallets W_1..W_k; on a misfit, flush all wallets.

    The misfit transaction is discarded.  While the bank is offline
    (all wallets flush together) every arrival is discarded.
    """

    name = "fa"

    def __init__(self, params: ModelParams, trace: EventTrace | None = None):
        self.params = params
        self.bank = WalletBank(params, trace)

    @property
    def trace(self) -> EventTrace:
        return self.bank.trace

    def step(self, slot: int, tx: Transaction | None) -> PolicyDecision:
        bank = self.bank
        bank.begin_slot(slot)
        if tx is None:
            return NO_ARRIVAL
        bank.trace.add(slot, ARRIVE, value=tx.value)
        if not bank.all_available(slot):
            bank.trace.add(slot, DISCARD, value=tx.value)
            return PolicyDecision("discard")
        for i in range(1, self.params.k + 1):
            if tx.value <= bank.remaining[i - 1]:
                bank.settle(i, tx, slot)
                return PolicyDecision("settle", wallet=i)
        bank.trace.add(slot, DISCARD, value=tx.value)
        for i in range(1, self.params.k + 1):
            bank.flush(i, slot)
        return PolicyDecision("discard", flushed=tuple(range(1, self.params.k + 1)))

    def finish(self, slot: int, terminal_flushes: bool = False) -> list[int]:
        if not terminal_flushes:
            return []
        return _flush_leftovers(self.bank, slot)

    def clone(self) -> "FlushAllPolicy":
        other = object.__new__(FlushAllPolicy)
        other.params = self.params
        other.bank = self.bank.clone()
        return other


class FlushWhenFullPolicy:
    """One active wallet in strict cyclic order; flush it on a misfit.

    After flushing, the successor wallet becomes active even if a later
    wallet happens to be online; arrivals are discarded while the active
    wallet is offline.
    """

    name = "fwf"

    def __init__(self, params: ModelParams, trace: EventTrace | None = None):
        self.params = params
        self.bank = WalletBank(params, trace)
        self.active = 1

    @property
    def trace(self) -> EventTrace:
        return self.bank.trace

    def step(self, slot: int, tx: Transaction | None) -> PolicyDecision:
        bank = self.bank
        bank.begin_slot(slot)
        if tx is None:
            return NO_ARRIVAL
        bank.trace.add(slot, ARRIVE, value=tx.value)
        i = self.active
        if not bank.wallet_available(i, slot):
            bank.trace.add(slot, DISCARD, value=tx.value)
            return PolicyDecision("discard")
        if tx.value <= bank.remaining[i - 1]:
            bank.settle(i, tx, slot)
            return PolicyDecision("settle", wallet=i)
        bank.trace.add(slot, DISCARD, value=tx.value)
        bank.flush(i, slot)
        self.active = i % self.params.k + 1
        return PolicyDecision("discard", flushed=(i,))

    def finish(self, slot: int, terminal_flushes: bool = False) -> list[int]:
        if not terminal_flushes:
            return []
        return _flush_leftovers(self.bank, slot)

    def clone(self) -> "FlushWhenFullPolicy":
        other = object.__new__(FlushWhenFullPolicy)
        other.params = self.params
        other.bank = self.bank.clone()
        other.active = self.active
        return other


class FlushTwoWhenFullPolicy:
    """Wallets paired (W_1,W_2), (W_3,W_4), ...; one active pair.

    A transaction goes to the first wallet of the pair if it fits, else
    to the second; if it fits neither, both are flushed together, the
    transaction is discarded, and the next pair becomes active.
    """

    name = "ftwf"

    def __init__(self, params: ModelParams, trace: EventTrace | None = None):
        if params.k % 2 != 0:
            raise OddWalletCount(f"pair policy needs even k, got {params.k}")
        self.params = params
        self.bank = WalletBank(params, trace)
        self.active_pair = 1

    @property
    def trace(self) -> EventTrace:
        return self.bank.trace

    def step(self, slot: int, tx: Transaction | None) -> PolicyDecision:
        bank = self.bank
        bank.begin_slot(slot)
        if tx is None:
            return NO_ARRIVAL
        bank.trace.add(slot, ARRIVE, value=tx.value)
        w1 = 2 * self.active_pair - 1
        w2 = w1 + 1
        if not (bank.wallet_available(w1, slot) and bank.wallet_available(w2, slot)):
            bank.trace.add(slot, DISCARD, value=tx.value)
            return PolicyDecision("discard")
        if tx.value <= bank.remaining[w1 - 1]:
            bank.settle(w1, tx, slot)
            return PolicyDecision("settle", wallet=w1)
        if tx.value <= bank.remaining[w2 - 1]:
            bank.settle(w2, tx, slot)
            return PolicyDecision("settle", wallet=w2)
        bank.trace.add(slot, DISCARD, value=tx.value)
        bank.flush(w1, slot)
        bank.flush(w2, slot)
        self.active_pair = self.active_pair % (self.params.k // 2) + 1
        return PolicyDecision("discard", flushed=(w1, w2))

    def finish(self, slot: int, terminal_flushes: bool = False) -> list[int]:
        if not terminal_flushes:
            return []
        return _flush_leftovers(self.bank, slot)

    def clone(self) -> "FlushTwoWhenFullPolicy":
        other = object.__new__(FlushTwoWhenFullPolicy)
        other.params = self.params
        other.bank = self.bank.clone()
        other.active_pair = self.active_pair
        return other


class RandTwoPolicy:
    """Single real wallet of size C driven by a simulated two-wallet run.

    A shadow FlushAll with two wallets of size C each is fed the same
    arrivals.  Each time the real wallet comes online (including at the
    start) a fair coin picks one shadow wallet; the real wallet then
    settles exactly the transactions that shadow wallet settles and
    flushes when the shadow run flushes.  With ``half_size_shadow`` the
    shadow wallets are C/2 each (total C) instead.

    Coins come from ``coins`` (a zero-argument callable returning 0 or 1)
    when given, else from a seeded RNG.
    """

    name = "rand2"

    def __init__(
        self,
        params: ModelParams,
        seed: int | None = None,
        coins=None,
        trace: EventTrace | None = None,
        half_size_shadow: bool = False,
    ):
        if params.k != 1:
            raise InvalidParams(f"rand2 runs a single wallet, got k={params.k}")
        if coins is None and seed is None:
            raise InvalidParams("rand2 needs a seed or an explicit coin source")
        self.params = params
        self.bank = WalletBank(params, trace)
        shadow_c = params.C if half_size_shadow else 2 * params.C
        self.shadow = FlushAllPolicy(
            ModelParams(C=shadow_c, T=params.T, F=params.F, k=2),
            trace=EventTrace(),
        )
        if coins is not None:
            self._coin = coins
            self._rng = None
        else:
            self._rng = random.Random(seed)
            self._coin = lambda: self._rng.getrandbits(1)
        self.chosen: int | None = None
        self.coins_drawn = 0

    @property
    def trace(self) -> EventTrace:
        return self.bank.trace

    def step(self, slot: int, tx: Transaction | None) -> PolicyDecision:
        bank = self.bank
        bank.begin_slot(slot)
        if bank.wallet_available(1, slot) and self.chosen is None:
            self.chosen = 1 + self._coin()
            self.coins_drawn += 1
        shadow_decision = self.shadow.step(slot, tx)
        if tx is None:
            return NO_ARRIVAL
        bank.trace.add(slot, ARRIVE, value=tx.value)
        if shadow_decision.action == "settle" and shadow_decision.wallet == self.chosen:
            bank.settle(1, tx, slot)
            return PolicyDecision("settle", wallet=1)
        bank.trace.add(slot, DISCARD, value=tx.value)
        if shadow_decision.flushed:
            bank.flush(1, slot)
            self.chosen = None
            return PolicyDecision("discard", flushed=(1,))
        return PolicyDecision("discard")

    def finish(self, slot: int, terminal_flushes: bool = False) -> list[int]:
        if not terminal_flushes:
            return []
        return _flush_leftovers(self.bank, slot)

    def clone(self) -> "RandTwoPolicy":
        if self._rng is None:
            raise InvalidParams("cannot clone a rand2 policy with an external coin source")
        other = object.__new__(RandTwoPolicy)
        other.params = self.params
        other.bank = self.bank.clone()
        other.shadow = self.shadow.clone()
        other._rng = random.Random()
        other._rng.setstate(self._rng.getstate())
        other._coin = lambda: other._rng.getrandbits(1)
        other.chosen = self.chosen
        other.coins_drawn = self.coins_drawn
        return other


class ThresholdPolicy:
    """Pool policy A_eta: settle whenever possible, flush in eta*C tranches.

    A transaction settles iff the available balance covers it.  After a
    settle, while the committed reserve is at least eta*C, exactly eta*C
    is flushed (at most one tranche can trigger per settle since the
    reserve was below eta*C beforehand and T <= eta*C).  At the end of a
    run the residual reserve is flushed in one final tranche regardless
    of accounting mode, so the flush count is always ceil(V / (eta*C)).
    """

    name = "eta"

    def __init__(self, params: ModelParams, trace: EventTrace | None = None):
        if params.eta_ppm is None:
            raise InvalidEta("threshold policy needs eta_ppm")
        self.params = params
        self.pool = CollateralPool(params, trace)
        self.eta_c = params.eta_collateral

    @property
    def trace(self) -> EventTrace:
        return self.pool.trace

    def step(self, slot: int, tx: Transaction | None) -> PolicyDecision:
        pool = self.pool
        pool.begin_slot(slot)
        if tx is None:
            return NO_ARRIVAL
        pool.trace.add(slot, ARRIVE, value=tx.value)
        if pool.available(slot) < tx.value:
            pool.trace.add(slot, DISCARD, value=tx.value)
            return PolicyDecision("discard")
        pool.settle(tx, slot)
        flushed: int | Fraction | None = None
        while pool.committed >= self.eta_c:
            pool.flush(self.eta_c, slot)
            flushed = self.eta_c if flushed is None else flushed + self.eta_c
        return PolicyDecision("settle", flush_amount=flushed)

    def finish(self, slot: int, terminal_flushes: bool = True) -> int | Fraction | None:
        # the final partial tranche is part of the policy, not optional
        if self.pool.committed > 0:
            amount = self.pool.committed
            self.pool.flush(amount, slot)
            return amount
        return None

    def clone(self) -> "ThresholdPolicy":
        other = object.__new__(ThresholdPolicy)
        other.params = self.params
        other.pool = self.pool.clone()
        other.eta_c = self.eta_c
        return other


def _flush_leftovers(bank: WalletBank, slot: int) -> list[int]:
    """Flush every online wallet holding committed value; returns indices."""
    flushed = []
    for i in range(1, bank.params.k + 1):
        if bank.wallet_available(i, slot) and bank.committed(i) > 0:
            bank.flush(i, slot)
            flushed.append(i)
    return flushed


POLICY_KINDS = ("fa", "fwf", "ftwf", "rand2", "eta")


def make_policy(
    kind: str,
    params: ModelParams,
    seed: int | None = None,
    trace: EventTrace | None = None,
    coins=None,
    half_size_shadow: bool = False,
):
    """Build a policy from its configuration string."""
    if kind == "fa":
        return FlushAllPolicy(params, trace)
    if kind == "fwf":
        return FlushWhenFullPolicy(params, trace)
    if kind == "ftwf":
        return FlushTwoWhenFullPolicy(params, trace)
    if kind == "rand2":
        return RandTwoPolicy(
            params, seed=seed, coins=coins, trace=trace, half_size_shadow=half_size_shadow
        )
    if kind == "eta":
        return ThresholdPolicy(params, trace)
    raise InvalidParams(f"unknown policy kind {kind!r}; expected one of {POLICY_KINDS}")
