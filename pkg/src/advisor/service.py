"""The advisory exchange: a user asks the first mix how to split a deposit."""

import json
import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Dict, List, Optional

import numpy as np

from src.ledger.ledger import Ledger
from src.ledger.models import Amount
from src.network.p2p import NetAddr
from src.utils.logger import HopLog

from .histogram import build_histogram
from .split_advisor import SplitRecommendation, recommend_split

if TYPE_CHECKING:
    from src.mixnet.cascade import MixNetwork
    from src.mixnet.mix_node import MixNode


logger = logging.getLogger('zcash_mixsim')


@dataclass(frozen=True)
class AdviceRequest:
    amount: Amount
    reply_key: bytes

    def to_bytes(self) -> bytes:
        return json.dumps(
            {'amount': self.amount.zatoshi, 'reply_key': self.reply_key.hex()}, sort_keys=True
        ).encode('utf-8')

    @classmethod
    def from_bytes(cls, raw: bytes) -> 'AdviceRequest':
        data = json.loads(raw.decode('utf-8'))
        return cls(Amount(int(data['amount'])), bytes.fromhex(data['reply_key']))


class AdvisoryService:
    """
    Split advisor reachable over a sealed request/response exchange.

    With a mix network the service is hosted by an entry mix: requests are
    sealed to that mix and answers sealed to a one-time reply key, and both
    legs appear on the wire. Without one it answers locally.
    """

    def __init__(
        self,
        config: Dict[str, Any],
        ledger: Ledger,
        rng: np.random.Generator,
        mixnet: Optional['MixNetwork'] = None,
        hop_log: Optional[HopLog] = None
    ):
        """
        Initialize the advisory service.

        Args:
            config: Full scenario configuration
            ledger: Ledger whose public views feed the histogram
            rng: Random stream for reply keys and sealing nonces
            mixnet: Mix network hosting the service, if enabled
            hop_log: Log receiving the com exchange records
        """
        advisor = config.get('advisor', {})
        self.ledger = ledger
        self.rng = rng
        self.mixnet = mixnet
        self.hop_log = hop_log or HopLog('advisor')
        self.grid = Amount.from_zec(advisor.get('grid_zec', 0.01))
        self.objective = advisor.get('objective', 'min_count')
        self.denominations = tuple(Amount.from_zec(d) for d in advisor.get('denominations_zec', [0.1, 1, 10]))
        self.exclude_consumed = advisor.get('exclude_consumed', True)
        self.answered: List[SplitRecommendation] = []

    def advise(self, amount: Amount) -> SplitRecommendation:
        """Recommend a split from the current public ledger."""
        hist = build_histogram(self.ledger.views(), exclude_consumed=self.exclude_consumed)
        return recommend_split(amount, hist, self.grid, self.objective, self.denominations)

    def request(self, user: NetAddr, amount: Amount, host: Optional['MixNode'] = None) -> SplitRecommendation:
        """
        Run one com exchange for a user about to deposit `amount`.

        Args:
            user: Requesting user's address
            amount: Value the user wants to deposit
            host: Entry mix hosting the service; defaults to the first cascade's entry

        Returns:
            The recommendation as the user decodes it
        """
        if self.mixnet is None:
            recommendation = self.advise(amount)
            self._log(user, None, amount, recommendation)
            self.answered.append(recommendation)
            return recommendation

        host = host or self.mixnet.cascades[0].entry
        sealer = host.sealer
        reply = sealer.generate_keypair(self.rng)

        sealed_request = sealer.seal(host.keys.public, AdviceRequest(amount, reply.public).to_bytes(), self.rng)
        self.mixnet.record_link(user, host.address)

        received = AdviceRequest.from_bytes(sealer.open(host.keys.private, sealed_request))
        answer = self.advise(received.amount)
        sealed_answer = sealer.seal(received.reply_key, json.dumps(answer.to_dict()).encode('utf-8'), self.rng)
        self.mixnet.record_link(host.address, user)

        recommendation = SplitRecommendation.from_dict(json.loads(sealer.open(reply.private, sealed_answer)))
        self._log(user, host.address, amount, recommendation)
        self.answered.append(recommendation)
        return recommendation

    def _log(self, user: NetAddr, host: Optional[NetAddr], amount: Amount, answer: SplitRecommendation) -> None:
        self.hop_log.record(
            'com',
            user=user.value,
            mix=host.value if host is not None else None,
            request={'amount': amount.zatoshi},
            response=answer.to_dict(),
        )
        logger.debug(
            f"[Advisor] {user}: {amount} -> {answer.parts[0]} + {answer.parts[1]}"
            f"{' (fallback)' if answer.fallback else ''}"
        )
