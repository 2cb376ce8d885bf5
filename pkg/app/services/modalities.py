"""
Knowledge-transfer modalities over the shared broadcast medium.

    QRA  query-response-action: answers are executed once, never merged
    QRU  query-response-update: answers are merged into the NK region
    EU   QRU plus immediate merge of overheard responses
    EBU  QRU plus buffered overheard responses, merged when needed

Queries posted in iteration i are answered in i; responses are delivered
(and overheard) in i+1.
"""

import json
import logging
import os
from typing import Callable, Dict, List, Optional

from app.errors import ConfigurationError
from app.models import (
    ConditionSequence, EavesdropMessage, ModalityKind, NodeStatus, Query, Response, UpdateSource
)
from app.services.knowledge_store import apply_update
from app.services.metrics import MetricsLedger
from app.services.string_bt import make_knowledge_subtree, parse, serialize
from app.utils import ensure_dir

logger = logging.getLogger(__name__)

Connected = Callable[[object, object], bool]


class TraceWriter:
    """Writes one JSON object per query or response, in emission order"""

    def __init__(self, path: str):
        self.path = path
        self._file = None
        self.count = 0

    def __enter__(self):
        ensure_dir(os.path.dirname(self.path))
        self._file = open(self.path, 'w', encoding='utf-8', newline='\n')
        return self

    def __exit__(self, exc_type, exc, tb):
        self._file.close()
        logger.info(f"Wrote {self.count} trace records to {self.path}")
        return False

    def __call__(self, record: Dict):
        self._file.write(json.dumps(record, sort_keys=True) + '\n')
        self.count += 1


class KnowledgeExchange:
    """Runs the query/response/eavesdrop protocol for every robot of a trial"""

    def __init__(self, engine, ledger: MetricsLedger, schema=None, query_wait: int = 50,
                 t_m: int = 5000, trace: Optional[Callable[[Dict], None]] = None):
        self.engine = engine
        self.ledger = ledger
        self.schema = schema
        self.query_wait = query_wait
        self.t_m = t_m
        self.trace = trace

    def _emit(self, message):
        if self.trace is not None:
            self.trace(message.to_trace())

    def merge_knowledge(self, robot, s_q: ConditionSequence, action_node, source: UpdateSource,
                        iteration: int) -> bool:
        """apply_update on the robot; exactly one ledger update event per real merge"""
        robot.kb, robot.control, did_update = apply_update(
            robot.kb, robot.control, s_q, action_node, self.engine, self.schema
        )
        if did_update:
            self.ledger.record_update(robot.id, iteration, source)
            if robot.awaiting == s_q:
                robot.awaiting = None
                robot.wait_remaining = 0
                robot.bb.set('awaiting_response', False)
            robot.refresh_percept()
        return did_update

    def maybe_post_query(self, robot, iteration: int) -> Optional[Query]:
        """Turn the tick's query request into a broadcast Query, entering query-wait"""
        s_q = robot.bb.get('query_request')
        if s_q is None:
            return None
        robot.bb.set('query_request', None)
        if robot.awaiting is not None or robot.kb.knows(s_q):
            return None

        robot.awaiting = s_q
        robot.wait_remaining = self.query_wait
        robot.bb.set('awaiting_response', True)
        self.ledger.record_query(robot.id, iteration)
        query = Query(robot.id, s_q, iteration)
        self._emit(query)
        return query

    def open_queries(self, robots: List, posted: List[Query], iteration: int) -> List[Query]:
        """Queries still waiting for an answer, heard again by whoever is in range now.

        A re-broadcast is not a new query: nothing is counted or traced.
        """
        fresh = {query.sender for query in posted}
        return [Query(robot.id, robot.awaiting, iteration) for robot in robots
                if robot.awaiting is not None and robot.id not in fresh]

    def maybe_respond(self, robot, query: Query, iteration: int) -> Optional[Response]:
        if robot.id == query.sender:
            return None
        node = robot.kb.lookup(query.sequence)
        if node is None:
            return None
        return Response(robot.id, query.sender, query.sequence, serialize(node), iteration)

    def deliver_queries(self, robots: List, queries: List[Query], iteration: int,
                        connected: Connected) -> List[Response]:
        """Every query reaches the robots in range; the lowest-id robot that knows the answer replies"""
        by_id = {robot.id: robot for robot in robots}
        responses = []
        for query in queries:
            sender = by_id[query.sender]
            for robot in robots:
                if robot.id == query.sender or not connected(sender, robot):
                    continue
                response = self.maybe_respond(robot, query, iteration)
                if response is not None:
                    responses.append(response)
                    self._emit(response)
                    break
        return responses

    def on_response(self, robot, response: Response, iteration: int) -> bool:
        """Handle a response addressed to this robot; first valid response wins"""
        if response.recipient != robot.id or robot.awaiting != response.sequence:
            return False
        try:
            node = parse(response.action_text)
            self.engine.validate(node, self.schema)
        except ConfigurationError as e:
            logger.warning(f"Robot {robot.id} ignored malformed response from {response.sender}: {e}")
            return False

        robot.awaiting = None
        robot.wait_remaining = 0
        robot.bb.set('awaiting_response', False)
        self.ledger.record_effective(robot.id, iteration)

        if robot.modality is ModalityKind.QRA:
            robot.transient = make_knowledge_subtree(response.sequence, node)
            robot.transient_age = 0
        else:
            self.merge_knowledge(robot, response.sequence, node, UpdateSource.QUERY, iteration)
        return True

    def intercept(self, observer, response: Response, sender, recipient,
                  connected: Connected) -> Optional[EavesdropMessage]:
        """An EU/EBU bystander in range of both ends overhears the response"""
        if observer.id in (response.sender, response.recipient) or not observer.modality.eavesdrops:
            return None
        if not (connected(observer, sender) and connected(observer, recipient)):
            return None
        try:
            node = parse(response.action_text)
        except ConfigurationError as e:
            logger.warning(f"Robot {observer.id} dropped corrupt overheard payload: {e}")
            return None
        return EavesdropMessage(response.sequence, node, self.t_m, response.iteration)

    def deliver_responses(self, robots: List, responses: List[Response], iteration: int,
                          connected: Connected):
        by_id = {robot.id: robot for robot in robots}
        for response in responses:
            self.ledger.record_response()
            sender, recipient = by_id[response.sender], by_id[response.recipient]
            self.on_response(recipient, response, iteration)
            for observer in robots:
                message = self.intercept(observer, response, sender, recipient, connected)
                if message is not None:
                    observer.buffer.add(message)

    def eu_process(self, robot, iteration: int) -> NodeStatus:
        """Merge every unknown overheard subtree, then clear the buffer"""
        if not robot.buffer.messages:
            return NodeStatus.FAILURE
        updated = False
        for message in robot.buffer.messages:
            if not robot.kb.knows(message.sequence):
                updated |= self.merge_knowledge(robot, message.sequence, message.action,
                                                UpdateSource.EU, iteration)
        robot.buffer.clear()
        return NodeStatus.SUCCESS if updated else NodeStatus.FAILURE

    def ebu_process(self, robot, s_q: ConditionSequence, iteration: int) -> NodeStatus:
        """Look for s_q in the buffer before resorting to a query"""
        message = robot.buffer.take(s_q)
        if message is None:
            return NodeStatus.FAILURE
        if self.merge_knowledge(robot, s_q, message.action, UpdateSource.EBU, iteration):
            return NodeStatus.SUCCESS
        return NodeStatus.FAILURE
