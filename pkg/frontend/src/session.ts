/** Client side of the session wire protocol.
 *
 * The transport is injected so the same client runs over a browser
 * WebSocket or a test capture harness. Inbound broadcasts are reduced into
 * a mirrored room state; a welcome snapshot plus every later broadcast
 * reconstructs exactly what long-lived participants hold.
 */

import type {
  ParticipantState,
  Pose,
  RoomSnapshot,
  ServerMessage,
} from "./types";

export interface OutboundTransport {
  send(text: string): void;
}

export interface SessionEvents {
  onWelcome?(selfId: string, snapshot: RoomSnapshot): void;
  onUserJoined?(user: ParticipantState): void;
  onUserLeft?(userId: string): void;
  onPresence?(user: ParticipantState, resolvedPosition?: [number, number, number]): void;
  onOverlayState?(active: string[]): void;
  onFollowState?(follows: Record<string, string>): void;
  onError?(code: string, message: string): void;
}

export class ProtocolViolation extends Error {}

export const ORIGIN_POSE: Pose = { p: [0, 0, 0], q: [0, 0, 0, 1] };

function clonePose(pose: Pose): Pose {
  return { p: [...pose.p] as Pose["p"], q: [...pose.q] as Pose["q"] };
}

export class SessionClient {
  selfId: string | null = null;
  lastSeq = 0;
  readonly users = new Map<string, ParticipantState>();
  active: string[] = [];
  follows: Record<string, string> = {};

  readonly events: SessionEvents;

  private readonly transport: OutboundTransport;

  constructor(transport: OutboundTransport, events: SessionEvents = {}) {
    this.transport = transport;
    this.events = events;
  }

  // --- outbound -------------------------------------------------------------

  join(room: string, name: string, sceneHash: string): void {
    this.send({ type: "join", room, name, sceneHash });
  }

  sendPose(head: Pose, hands: [Pose, Pose]): void {
    this.send({ type: "pose", head, hands });
  }

  toggleOverlay(methodId: string): void {
    this.send({ type: "toggleOverlay", methodId });
  }

  follow(leaderId: string | null): void {
    this.send({ type: "follow", leaderId });
  }

  leave(): void {
    this.send({ type: "leave" });
  }

  /** The userId the local client follows, if any. */
  get followTarget(): string | null {
    if (this.selfId === null) {
      return null;
    }
    return this.follows[this.selfId] ?? null;
  }

  private send(message: Record<string, unknown>): void {
    this.transport.send(JSON.stringify(message));
  }

  // --- inbound --------------------------------------------------------------

  /** Feed one raw message from the transport into the mirror. */
  receive(text: string): void {
    let message: ServerMessage;
    try {
      message = JSON.parse(text) as ServerMessage;
    } catch (error) {
      throw new ProtocolViolation(`unparseable server message: ${(error as Error).message}`);
    }
    switch (message.type) {
      case "welcome":
        this.applyWelcome(message.selfId, message.seq, message.snapshot);
        break;
      case "join":
        this.stamp(message.seq);
        this.users.set(message.userId, {
          userId: message.userId,
          name: message.name,
          color: message.color,
          head: clonePose(message.head),
          hands: message.hands.map(clonePose),
        });
        this.events.onUserJoined?.(this.users.get(message.userId) as ParticipantState);
        break;
      case "presence": {
        this.stamp(message.seq);
        const user = this.users.get(message.userId);
        if (user === undefined) {
          throw new ProtocolViolation(`presence for unknown user ${message.userId}`);
        }
        user.head = clonePose(message.head);
        user.hands = message.hands.map(clonePose);
        this.events.onPresence?.(user, message.resolvedPosition);
        break;
      }
      case "overlayState":
        this.stamp(message.seq);
        this.active = [...message.active];
        this.events.onOverlayState?.(this.active);
        break;
      case "followState":
        this.stamp(message.seq);
        this.follows = { ...message.follows };
        this.events.onFollowState?.(this.follows);
        break;
      case "leave":
        this.stamp(message.seq);
        this.users.delete(message.userId);
        this.events.onUserLeft?.(message.userId);
        break;
      case "error":
        this.events.onError?.(message.code, message.message);
        break;
      default:
        throw new ProtocolViolation(
          `unknown message type ${JSON.stringify((message as { type?: unknown }).type)}`,
        );
    }
  }

  private applyWelcome(selfId: string, seq: number, snapshot: RoomSnapshot): void {
    this.selfId = selfId;
    // The welcome seq is the watermark of the join broadcast announcing
    // this client; later broadcasts continue from watermark + 1.
    this.lastSeq = seq;
    this.users.clear();
    for (const participant of snapshot.participants) {
      this.users.set(participant.userId, {
        userId: participant.userId,
        name: participant.name,
        color: participant.color,
        head: clonePose(participant.head),
        hands: participant.hands.map(clonePose),
      });
    }
    this.active = [...snapshot.active];
    this.follows = { ...snapshot.follows };
    this.events.onWelcome?.(selfId, snapshot);
  }

  private stamp(seq: number): void {
    if (seq <= this.lastSeq) {
      throw new ProtocolViolation(`seq ${seq} arrived after ${this.lastSeq}`);
    }
    this.lastSeq = seq;
  }
}
