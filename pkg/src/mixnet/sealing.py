"""Authenticated layer sealing: the abstract contract and two implementations."""

import hashlib
import hmac
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey, X25519PublicKey
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF
from cryptography.hazmat.primitives.serialization import Encoding, NoEncryption, PrivateFormat, PublicFormat


class MixnetError(Exception):
    """Base class for mix network errors."""


class IntegrityFailure(MixnetError):
    """A sealed layer failed authentication or could not be opened."""


@dataclass(frozen=True)
class MixKeys:
    public: bytes
    private: bytes


class LayerSealer(ABC):
    """
    Abstract interface for sealing one layer of a packet.

    Implementations must guarantee that only the holder of the private key
    can open a sealed blob, and that any modification of the blob makes
    open() fail with IntegrityFailure.
    """

    name: str = 'abstract'
    overhead: int = 0  # bytes added by one seal()

    @abstractmethod
    def generate_keypair(self, rng: np.random.Generator) -> MixKeys:
        """
        Create a mix keypair.

        Args:
            rng: Random stream used for key material

        Returns:
            MixKeys with the public half handed to senders
        """
        pass

    @abstractmethod
    def seal(self, public_key: bytes, plaintext: bytes, rng: np.random.Generator) -> bytes:
        """
        Seal plaintext so only the matching private key opens it.

        Args:
            public_key: Recipient's public key
            plaintext: Bytes to protect
            rng: Random stream for nonces and ephemeral keys

        Returns:
            Sealed blob, exactly len(plaintext) + overhead bytes
        """
        pass

    @abstractmethod
    def open(self, private_key: bytes, sealed: bytes) -> bytes:
        """
        Authenticate and decrypt a sealed blob.

        Args:
            private_key: Recipient's private key
            sealed: Blob produced by seal()

        Returns:
            The original plaintext

        Raises:
            IntegrityFailure: If the blob was tampered with or not sealed for this key
        """
        pass


class KeyedStreamSealer(LayerSealer):
    """
    Test-mode sealer: keyed pseudorandom keystream plus HMAC tag.

    The keystream is SHAKE-256 over key || nonce; the tag is HMAC-SHA256
    over nonce || ciphertext. Public and private key are the same secret,
    which stands in for a key agreement.
    """

    name = 'keyed_stream'
    NONCE_SIZE = 16
    TAG_SIZE = 32
    overhead = NONCE_SIZE + TAG_SIZE

    def generate_keypair(self, rng: np.random.Generator) -> MixKeys:
        secret = rng.bytes(32)
        return MixKeys(public=secret, private=secret)

    def seal(self, public_key: bytes, plaintext: bytes, rng: np.random.Generator) -> bytes:
        nonce = rng.bytes(self.NONCE_SIZE)
        ciphertext = _xor(plaintext, self._keystream(public_key, nonce, len(plaintext)))
        tag = hmac.new(public_key, nonce + ciphertext, hashlib.sha256).digest()
        return nonce + ciphertext + tag

    def open(self, private_key: bytes, sealed: bytes) -> bytes:
        if len(sealed) < self.overhead:
            raise IntegrityFailure("sealed layer too short")
        nonce = sealed[:self.NONCE_SIZE]
        ciphertext = sealed[self.NONCE_SIZE:-self.TAG_SIZE]
        tag = sealed[-self.TAG_SIZE:]
        expected = hmac.new(private_key, nonce + ciphertext, hashlib.sha256).digest()
        if not hmac.compare_digest(tag, expected):
            raise IntegrityFailure("layer tag mismatch")
        return _xor(ciphertext, self._keystream(private_key, nonce, len(ciphertext)))

    @staticmethod
    def _keystream(key: bytes, nonce: bytes, length: int) -> bytes:
        return hashlib.shake_256(key + nonce).digest(length)


class X25519AeadSealer(LayerSealer):
    """
    Sealer built on X25519 key agreement, HKDF-SHA256 and AES-GCM.

    Each seal uses a fresh ephemeral key, so layers sealed for the same mix
    are unlinkable. Blob layout: ephemeral public key || nonce || ciphertext+tag.
    """

    name = 'x25519_aesgcm'
    KEY_SIZE = 32
    NONCE_SIZE = 12
    TAG_SIZE = 16
    overhead = KEY_SIZE + NONCE_SIZE + TAG_SIZE
    INFO = b'zcash-mixsim layer'

    def generate_keypair(self, rng: np.random.Generator) -> MixKeys:
        private = X25519PrivateKey.from_private_bytes(rng.bytes(self.KEY_SIZE))
        public = private.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)
        return MixKeys(public=public, private=private.private_bytes(Encoding.Raw, PrivateFormat.Raw, NoEncryption()))

    def seal(self, public_key: bytes, plaintext: bytes, rng: np.random.Generator) -> bytes:
        ephemeral = X25519PrivateKey.from_private_bytes(rng.bytes(self.KEY_SIZE))
        shared = ephemeral.exchange(X25519PublicKey.from_public_bytes(public_key))
        epk = ephemeral.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)
        nonce = rng.bytes(self.NONCE_SIZE)
        ciphertext = AESGCM(self._derive(shared, epk)).encrypt(nonce, plaintext, epk)
        return epk + nonce + ciphertext

    def open(self, private_key: bytes, sealed: bytes) -> bytes:
        if len(sealed) < self.overhead:
            raise IntegrityFailure("sealed layer too short")
        epk = sealed[:self.KEY_SIZE]
        nonce = sealed[self.KEY_SIZE:self.KEY_SIZE + self.NONCE_SIZE]
        ciphertext = sealed[self.KEY_SIZE + self.NONCE_SIZE:]
        try:
            private = X25519PrivateKey.from_private_bytes(private_key)
            shared = private.exchange(X25519PublicKey.from_public_bytes(epk))
            return AESGCM(self._derive(shared, epk)).decrypt(nonce, ciphertext, epk)
        except (InvalidTag, ValueError) as e:
            raise IntegrityFailure(f"layer failed authentication: {e.__class__.__name__}")

    def _derive(self, shared: bytes, epk: bytes) -> bytes:
        return HKDF(algorithm=hashes.SHA256(), length=32, salt=epk, info=self.INFO).derive(shared)


def _xor(data: bytes, stream: bytes) -> bytes:
    return (np.frombuffer(data, dtype=np.uint8) ^ np.frombuffer(stream, dtype=np.uint8)).tobytes()


SEALERS = {
    KeyedStreamSealer.name: KeyedStreamSealer,
    X25519AeadSealer.name: X25519AeadSealer,
}


def get_sealer(name: str) -> LayerSealer:
    """
    Factory for the configured sealer.

    Args:
        name: 'keyed_stream' or 'x25519_aesgcm'

    Returns:
        LayerSealer instance

    Raises:
        MixnetError: If the name is unknown
    """
    try:
        return SEALERS[name]()
    except KeyError:
        raise MixnetError(f"Unknown sealer: {name}. Valid options: {', '.join(sorted(SEALERS))}")
