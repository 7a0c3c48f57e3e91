"""
协议模块
跨层接口及其实现：MAC、邻居表、路由表、路由协议、路由集合TLV、邻居发现
"""

from protocols.interfaces import (
    DeferDecision,
    DeferReason,
    IDeferTransmission,
    IForwardingJudge,
    ILinkOverhearingSource,
    IOpportunisticLinkLayer,
    IRoutingOverhearingSource,
    NoDeferral,
)

__all__ = [
    "DeferDecision",
    "DeferReason",
    "IOpportunisticLinkLayer",
    "IForwardingJudge",
    "ILinkOverhearingSource",
    "IRoutingOverhearingSource",
    "IDeferTransmission",
    "NoDeferral",
]
