/** Rendering shell: camera modes, picking, avatars, and shared exploration.
 *
 * Network callbacks only enqueue work; the queue drains on the render loop
 * between frames, so the three.js scene is never mutated concurrently.
 */

import * as THREE from "three";

import { CityScene } from "./city";
import { PanelController } from "./panel";
import { SessionClient } from "./session";
import type { ParticipantState, Pose } from "./types";

export type CameraMode = "ground" | "fly";

const EYE_HEIGHT = 1.7;
const TELEPORT_BEHIND = 1.5;
const STALE_AFTER_MS = 5000;
const STALE_OPACITY = 0.35;

interface AvatarParts {
  group: THREE.Group;
  materials: THREE.MeshLambertMaterial[];
  lastUpdate: number;
}

/** Remote participants as colored head cubes with two hand markers. */
export class AvatarSet {
  readonly root = new THREE.Group();

  private readonly avatars = new Map<string, AvatarParts>();

  upsert(user: ParticipantState, now: number): void {
    let parts = this.avatars.get(user.userId);
    if (parts === undefined) {
      const color = new THREE.Color(user.color.r ?? 0.8, user.color.g ?? 0.8, user.color.b ?? 0.8);
      const headMaterial = new THREE.MeshLambertMaterial({ color, transparent: true });
      const head = new THREE.Mesh(new THREE.BoxGeometry(0.3, 0.3, 0.3), headMaterial);
      const materials = [headMaterial];
      const group = new THREE.Group();
      group.name = `avatar:${user.userId}`;
      group.add(head);
      for (let i = 0; i < 2; i += 1) {
        const handMaterial = new THREE.MeshLambertMaterial({ color, transparent: true });
        const hand = new THREE.Mesh(new THREE.SphereGeometry(0.06, 12, 8), handMaterial);
        hand.name = `hand:${i}`;
        materials.push(handMaterial);
        group.add(hand);
      }
      parts = { group, materials, lastUpdate: now };
      this.avatars.set(user.userId, parts);
      this.root.add(group);
    }
    const [head, ...hands] = parts.group.children as THREE.Mesh[];
    head.position.set(...user.head.p);
    head.quaternion.set(...user.head.q);
    hands.forEach((hand, i) => {
      const pose: Pose | undefined = user.hands[i];
      if (pose !== undefined) {
        hand.position.set(...pose.p);
        hand.quaternion.set(...pose.q);
      }
    });
    parts.lastUpdate = now;
    for (const material of parts.materials) {
      material.opacity = 1;
    }
  }

  remove(userId: string): void {
    const parts = this.avatars.get(userId);
    if (parts !== undefined) {
      this.root.remove(parts.group);
      this.avatars.delete(userId);
    }
  }

  /** Fade avatars that stopped broadcasting more than 5 s ago. */
  dimStale(now: number): void {
    for (const parts of this.avatars.values()) {
      if (now - parts.lastUpdate > STALE_AFTER_MS) {
        for (const material of parts.materials) {
          material.opacity = STALE_OPACITY;
        }
      }
    }
  }

  lastPosition(userId: string): THREE.Vector3 | null {
    const parts = this.avatars.get(userId);
    if (parts === undefined) {
      return null;
    }
    return (parts.group.children[0] as THREE.Mesh).position.clone();
  }
}

export interface ViewerOptions {
  container: HTMLElement;
  city: CityScene;
  panel: PanelController;
}

export class Viewer {
  readonly scene = new THREE.Scene();
  readonly camera: THREE.PerspectiveCamera;
  readonly avatars = new AvatarSet();
  mode: CameraMode = "ground";
  selection: string | null = null;

  private readonly renderer: THREE.WebGLRenderer;
  private readonly city: CityScene;
  private readonly panel: PanelController;
  private readonly raycaster = new THREE.Raycaster();
  private readonly pending: Array<() => void> = [];
  private session: SessionClient | null = null;
  private readonly keys = new Set<string>();

  constructor(options: ViewerOptions) {
    this.city = options.city;
    this.panel = options.panel;
    const { clientWidth, clientHeight } = options.container;
    this.camera = new THREE.PerspectiveCamera(70, clientWidth / clientHeight, 0.1, 2000);
    this.camera.position.set(0, EYE_HEIGHT, 30);
    this.renderer = new THREE.WebGLRenderer({ antialias: true });
    this.renderer.setSize(clientWidth, clientHeight);
    options.container.appendChild(this.renderer.domElement);

    this.scene.background = new THREE.Color(0x10131a);
    this.scene.add(new THREE.AmbientLight(0xffffff, 0.7));
    const sun = new THREE.DirectionalLight(0xffffff, 1.2);
    sun.position.set(40, 80, 20);
    this.scene.add(sun);
    this.scene.add(this.city.root);
    this.scene.add(this.avatars.root);

    window.addEventListener("resize", () => this.resize(options.container));
    window.addEventListener("keydown", (event) => this.keys.add(event.key.toLowerCase()));
    window.addEventListener("keyup", (event) => this.keys.delete(event.key.toLowerCase()));
  }

  /** Hook a live session: broadcasts apply between frames. */
  attachSession(client: SessionClient): void {
    this.session = client;
    const enqueue = (work: () => void): void => {
      this.pending.push(work);
    };
    client.events.onOverlayState = (active) => enqueue(() => this.city.applyOverlayState(active));
    client.events.onPresence = (user) => enqueue(() => this.avatars.upsert(user, performance.now()));
    client.events.onUserJoined = (user) => enqueue(() => this.avatars.upsert(user, performance.now()));
    client.events.onUserLeft = (userId) => enqueue(() => this.avatars.remove(userId));
    client.events.onWelcome = (selfId, snapshot) =>
      enqueue(() => {
        this.city.applyOverlayState(snapshot.active);
        for (const participant of snapshot.participants) {
          if (participant.userId !== selfId) {
            this.avatars.upsert(participant, performance.now());
          }
        }
      });
  }

  toggleMode(): void {
    this.mode = this.mode === "ground" ? "fly" : "ground";
  }

  /** Pick under a pointer: method floors open the panel, a miss clears. */
  pick(ndcX: number, ndcY: number): void {
    this.raycaster.setFromCamera(new THREE.Vector2(ndcX, ndcY), this.camera);
    const hits = this.raycaster.intersectObjects(this.city.root.children, false);
    const visibleHit = hits.find((hit) => hit.object.visible);
    const nodeId = this.city.nodeIdOf(visibleHit?.object ?? null);
    if (nodeId === undefined) {
      this.selection = null;
      this.panel.close();
      return;
    }
    if (this.mode === "ground" && visibleHit !== undefined && nodeId.startsWith("platform:")) {
      const point = visibleHit.point;
      this.camera.position.set(point.x, point.y + EYE_HEIGHT, point.z);
      return;
    }
    const methodId = this.city.methodIdOf(nodeId);
    if (methodId !== undefined) {
      this.selection = methodId;
      this.panel.open(methodId);
    } else {
      this.selection = nodeId;
      this.panel.close();
    }
  }

  /** Toggle the call-graph overlay for the selected method. Online, only
   * the server echo changes rendering; offline it applies locally. */
  toggleSelectedOverlay(): void {
    if (this.selection === null || !(this.selection in this.city.document.overlays)) {
      return;
    }
    if (this.session !== null) {
      this.session.toggleOverlay(this.selection);
      return;
    }
    const active = new Set(this.city.overlayState);
    if (active.has(this.selection)) {
      active.delete(this.selection);
    } else {
      active.add(this.selection);
    }
    this.city.applyOverlayState([...active].sort());
  }

  teleportToUser(userId: string): void {
    const target = this.avatars.lastPosition(userId);
    if (target !== null) {
      this.camera.position.set(target.x, target.y, target.z + TELEPORT_BEHIND);
      this.camera.lookAt(target);
    }
  }

  /** One animation-loop step: drain queued network work, move, render. */
  update(deltaSeconds: number): void {
    const work = this.pending.splice(0, this.pending.length);
    for (const job of work) {
      job();
    }
    this.moveCamera(deltaSeconds);
    this.followLeader();
    this.avatars.dimStale(performance.now());
    this.renderer.render(this.scene, this.camera);
  }

  private moveCamera(deltaSeconds: number): void {
    if (this.session?.followTarget != null) {
      return;
    }
    const speed = (this.keys.has("shift") ? 30 : 12) * deltaSeconds;
    const forward = new THREE.Vector3();
    this.camera.getWorldDirection(forward);
    if (this.mode === "ground") {
      forward.y = 0;
      forward.normalize();
    }
    const right = new THREE.Vector3().crossVectors(forward, this.camera.up).normalize();
    if (this.keys.has("w")) this.camera.position.addScaledVector(forward, speed);
    if (this.keys.has("s")) this.camera.position.addScaledVector(forward, -speed);
    if (this.keys.has("d")) this.camera.position.addScaledVector(right, speed);
    if (this.keys.has("a")) this.camera.position.addScaledVector(right, -speed);
    if (this.mode === "fly") {
      if (this.keys.has("e")) this.camera.position.y += speed;
      if (this.keys.has("q")) this.camera.position.y -= speed;
    }
  }

  /** Following pins the camera position to the leader; the view direction
   * stays under local control. */
  private followLeader(): void {
    const target = this.session?.followTarget;
    if (target == null) {
      return;
    }
    const leader = this.session?.users.get(target);
    if (leader !== undefined) {
      this.camera.position.set(...leader.head.p);
    }
  }

  private resize(container: HTMLElement): void {
    this.camera.aspect = container.clientWidth / container.clientHeight;
    this.camera.updateProjectionMatrix();
    this.renderer.setSize(container.clientWidth, container.clientHeight);
  }
}
