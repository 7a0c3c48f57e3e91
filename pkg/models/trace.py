"""
追踪记录类型
"""

from enum import Enum

TRACE_SCHEMA_VERSION = 1


class TraceKind(str, Enum):
    """追踪记录类型"""
    HEADER = "header"
    LIFECYCLE = "lifecycle"
    ENERGY = "energy"
    ENERGY_FINAL = "energy_final"
    NODE_FINAL = "node_final"
    MAC_STROBE = "mac_strobe"
    MAC_ACK = "mac_ack"
    MAC_ACCEPT_QUERY = "mac_accept_query"
    MAC_OUTCOME = "mac_outcome"
    ADV_TRAIN = "adv_train"
    ADV_SUPPRESSED = "adv_suppressed"
    SIGNAL = "signal"
    JUDGE = "judge"
    EDC_UPDATE = "edc_update"
    ORIGINATE = "originate"
    APP_SKIP = "app_skip"
    DELIVER = "deliver"
    TTL_DROP = "ttl_drop"
    QUEUE_DROP = "queue_drop"
    NO_FORWARDER_DROP = "no_forwarder_drop"
    POWER_DROP = "power_drop"
    SET_TRUNCATED = "set_truncated"
    TLV_MALFORMED = "tlv_malformed"
    TX_WHILE_OFF = "tx_while_off"
    NEIGHBORS = "neighbors"


# 丢弃类记录，汇总时按类型计数
DROP_KINDS = (
    TraceKind.TTL_DROP,
    TraceKind.QUEUE_DROP,
    TraceKind.NO_FORWARDER_DROP,
    TraceKind.POWER_DROP,
)
