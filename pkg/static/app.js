var g=class extends Error{constructor(r,c){super(c);this.status=r;this.name="ApiError"}};async function V(o){let n=`HTTP ${o.status}`;try{let r=await o.json();typeof r.error=="string"&&(n=r.error)}catch{}return new g(o.status,n)}var I=class{constructor(n=""){this.baseUrl=n}url(n){return this.baseUrl+n}async getJson(n){let r=await fetch(this.url(n));if(!r.ok)throw await V(r);return await r.json()}async nextTask(n){return(await this.getJson(`/api/annotators/${encodeURIComponent(n)}/next`)).task}async clip(n){let r=await fetch(this.url(n));if(!r.ok)throw await V(r);return await r.arrayBuffer()}async submit(n){let r=await fetch(this.url("/api/annotations"),{method:"POST",headers:{"Content-Type":"application/json"},body:JSON.stringify(n)});if(!r.ok)throw await V(r);return await r.json()}async agreement(n,r,c){let m=new URLSearchParams({a:n,b:r,field:c});return await this.getJson(`/api/agreement?${m}`)}async progress(){return await this.getJson("/api/progress")}};function it(o,n,r){if(!Number.isInteger(n)||n<=0)throw new Error(`invalid sample rate ${n}`);if(!Number.isInteger(r)||r<=0)throw new Error(`invalid channel count ${r}`);let c=o.byteLength,m=r*(16/8),E=new ArrayBuffer(44+c),u=new DataView(E),i=(T,S)=>{for(let p=0;p<S.length;p++)u.setUint8(T+p,S.charCodeAt(p))};return i(0,"RIFF"),u.setUint32(4,36+c,!0),i(8,"WAVE"),i(12,"fmt "),u.setUint32(16,16,!0),u.setUint16(20,1,!0),u.setUint16(22,r,!0),u.setUint32(24,n,!0),u.setUint32(28,n*m,!0),u.setUint16(32,m,!0),u.setUint16(34,16,!0),i(36,"data"),u.setUint32(40,c,!0),new Uint8Array(E,44).set(new Uint8Array(o)),E}function at(o,n,r){return o/(n*r*(16/8))}var M=["neutral","happy","sad","excited","anger","fear","surprised","frustrated","disgust"],C=["negative","neutral","positive"];var st=[5,5,5];function j(){return{emotion:null,sentiment:null,vad:[...st],inaudible:!1}}function ut(o,n,r){return r.inaudible?{annotator_id:o,utterance_id:n,emotion:null,sentiment:null,vad:null,skipped_inaudible:!0}:{annotator_id:o,utterance_id:n,emotion:r.emotion,sentiment:r.sentiment,vad:[...r.vad],skipped_inaudible:!1}}var R=class{constructor(){this.pending=[]}get size(){return this.pending.length}get records(){return this.pending}push(n){this.pending.push(n)}async flush(n){let r=0;for(;this.pending.length>0;){try{await n(this.pending[0])}catch{break}this.pending.shift(),r++}return r}};function q(o){if(o.inaudible)return{};let n={};o.emotion===null?n.emotion="pick an emotion":M.includes(o.emotion)||(n.emotion=`unknown emotion ${o.emotion}`),o.sentiment===null?n.sentiment="pick a sentiment":C.includes(o.sentiment)||(n.sentiment=`unknown sentiment ${o.sentiment}`);for(let r of o.vad)if(!Number.isInteger(r)||r<1||r>10){n.vad=`values must be whole numbers from ${1} to ${10}`;break}return n}function z(o){return Object.keys(q(o)).length===0}function lt(o){return Number.isNaN(o)?1:Math.min(10,Math.max(1,Math.round(o)))}var kt=16e3,xt=1,Mt=[{key:"valence",label:"Valence",hint:"negative to positive"},{key:"arousal",label:"Arousal",hint:"calm to excited"},{key:"dominance",label:"Dominance",hint:"controlled to in control"}],Pt=`
<div id="start-screen">
  <h1>Utterance annotation</h1>
  <p>Enter your annotator id to begin your queue.</p>
  <form id="start-form">
    <input id="annotator-input" type="text" autocomplete="off" placeholder="annotator id" />
    <button id="start-btn" type="submit">Start</button>
  </form>
  <p id="start-error" class="error" hidden></p>
</div>

<div id="session-screen" hidden>
  <header>
    <span id="annotator-name"></span>
    <span id="progress"></span>
  </header>
  <div id="banner" class="banner" hidden>
    <span id="banner-text"></span>
    <button id="retry-btn" type="button">Retry</button>
  </div>
  <section id="clip-card">
    <p id="transcript"></p>
    <p id="clip-note" class="error" hidden></p>
    <audio id="player"></audio>
    <div id="audio-controls">
      <button id="play-btn" type="button">Play</button>
      <button id="replay-btn" type="button">Replay</button>
      <input id="seek" type="range" min="0" max="1000" step="1" value="0" />
      <span id="clock">0.0s</span>
    </div>
  </section>
  <section id="label-card">
    <fieldset id="emotion-group">
      <legend>Emotion <small>(keys 1-9)</small></legend>
    </fieldset>
    <p id="emotion-error" class="error" hidden></p>
    <fieldset id="sentiment-group">
      <legend>Sentiment</legend>
    </fieldset>
    <p id="sentiment-error" class="error" hidden></p>
    <fieldset id="vad-group">
      <legend>VAD (1-10, 5 is neutral)</legend>
    </fieldset>
    <p id="vad-error" class="error" hidden></p>
    <label id="inaudible-row">
      <input id="inaudible" type="checkbox" />
      clip is inaudible (skip without labels)
    </label>
    <button id="submit-btn" type="button" disabled>Submit</button>
    <p id="submit-error" class="error" hidden></p>
  </section>
</div>

<div id="done-screen" hidden>
  <h1>Queue complete</h1>
  <p id="done-summary"></p>
</div>
`;function Ht(){if(typeof window>"u"||!window.location)return{};let o=new URLSearchParams(window.location.search),n={},r=o.get("annotator");r&&(n.annotatorId=r);let c=Number(o.get("rate"));Number.isInteger(c)&&c>0&&(n.sampleRateHz=c);let m=Number(o.get("channels"));return Number.isInteger(m)&&m>0&&(n.channels=m),n}function dt(o,n,r={}){let c=Ht(),m=r.sampleRateHz??c.sampleRateHz??kt,E=r.channels??c.channels??xt;o.innerHTML=Pt;let u=o.ownerDocument,i=t=>{let e=o.querySelector(`#${t}`);if(!e)throw new Error(`template is missing #${t}`);return e},T=i("start-screen"),S=i("session-screen"),p=i("done-screen"),mt=i("start-form"),pt=i("annotator-input"),H=i("start-error"),J=i("annotator-name"),bt=i("progress"),F=i("banner"),X=i("banner-text"),ft=i("retry-btn"),yt=i("transcript"),D=i("clip-note"),l=i("player"),Y=i("play-btn"),gt=i("replay-btn"),N=i("seek"),G=i("clock"),Et=i("emotion-group"),ht=i("sentiment-group"),vt=i("vad-group"),U=i("inaudible"),W=i("submit-btn"),O=i("submit-error"),Q={emotion:i("emotion-error"),sentiment:i("sentiment-error"),vad:i("vad-error")},b=r.annotatorId??c.annotatorId??"",h=null,s=j(),_=0,$=!1,f=new R,K=new Map;M.forEach((t,e)=>{let a=u.createElement("button");a.type="button",a.dataset.emotion=t,a.textContent=`${e+1} ${t}`,a.addEventListener("click",()=>nt(t)),Et.appendChild(a),K.set(t,a)});let Z=new Map;for(let t of C){let e=u.createElement("button");e.type="button",e.dataset.sentiment=t,e.textContent=t,e.addEventListener("click",()=>Tt(t)),ht.appendChild(e),Z.set(t,e)}let tt=[],et=[];Mt.forEach((t,e)=>{let a=u.createElement("label");a.className="vad-row";let k=u.createElement("span");k.textContent=t.label,k.title=t.hint;let d=u.createElement("input");d.type="range",d.id=t.key,d.min=String(1),d.max=String(10),d.step="1",d.value=String(s.vad[e]);let x=u.createElement("span");x.className="vad-value",x.textContent=d.value,d.addEventListener("input",()=>{s.vad[e]=lt(Number(d.value)),d.value=String(s.vad[e]),x.textContent=d.value,w()}),a.append(k,d,x),vt.appendChild(a),tt.push(d),et.push(x)});function nt(t){s.inaudible||(s.emotion=t,w())}function Tt(t){s.inaudible||(s.sentiment=t,w())}U.addEventListener("change",()=>{s.inaudible=U.checked,w()});function w(){for(let[t,e]of K)e.classList.toggle("selected",s.emotion===t),e.disabled=s.inaudible;for(let[t,e]of Z)e.classList.toggle("selected",s.sentiment===t),e.disabled=s.inaudible;tt.forEach((t,e)=>{t.disabled=s.inaudible,t.value=String(s.vad[e]),et[e].textContent=t.value}),U.checked=s.inaudible,W.disabled=!z(s);for(let t of Object.values(Q))t.hidden=!0;O.hidden=!0}function St(){s=j(),w()}function y(t){$=t,Y.textContent=$?"Pause":"Play"}function rt(){try{let t=l.play();Promise.resolve(t).catch(()=>y(!1)),y(!0)}catch{y(!1)}}function ot(){$?(l.pause(),y(!1)):rt()}Y.addEventListener("click",ot),gt.addEventListener("click",()=>{l.currentTime=0,rt()}),l.addEventListener("ended",()=>y(!1)),l.addEventListener("timeupdate",()=>{let t=Number.isFinite(l.duration)&&l.duration>0?l.duration:_;G.textContent=`${l.currentTime.toFixed(1)}s`,t>0&&(N.value=String(Math.round(l.currentTime/t*1e3)))}),N.addEventListener("input",()=>{let t=Number.isFinite(l.duration)&&l.duration>0?l.duration:_;t>0&&(l.currentTime=Number(N.value)/1e3*t)});async function wt(t){D.hidden=!0,l.removeAttribute("src"),N.value="0",G.textContent="0.0s",y(!1);try{let e=await n.clip(t.clip_url);_=at(e.byteLength,m,E);let a=it(e,m,E);typeof URL.createObjectURL=="function"?l.src=URL.createObjectURL(new Blob([a],{type:"audio/wav"})):l.src=n.url(t.clip_url)}catch(e){_=0,D.textContent=e instanceof g?`clip unavailable: ${e.message}`:"clip unavailable: network error",D.hidden=!1}}function A(t){if(t)X.textContent=t,F.hidden=!1;else if(f.size>0){let e=f.size===1?"":"s";X.textContent=`${f.size} unsent annotation${e}`,F.hidden=!1}else F.hidden=!0}ft.addEventListener("click",()=>{(async()=>(await f.flush(t=>n.submit(t)),A(),h===null&&await L()))()});function B(t){for(let e of[T,S,p])e.hidden=e!==t}async function At(){h=null;let t="Every clip in your queue is annotated.";try{let a=(await n.progress()).annotators[b];a&&(t=`You annotated ${a.done} of ${a.total} clips.`)}catch{}i("done-summary").textContent=t,B(p)}async function L(){f.size>0&&(await f.flush(e=>n.submit(e)),A());let t;try{t=await n.nextTask(b)}catch(e){e instanceof g?(H.textContent=e.message,H.hidden=!1,B(T)):A("backend unreachable; Retry when back online");return}if(t===null){await At();return}h=t,B(S),bt.textContent=`${t.position} / ${t.total}`,yt.textContent=t.transcript,St(),await wt(t)}async function Lt(){if(h===null||!z(s))return;let t=q(s);if(Object.keys(t).length>0){for(let[a,k]of Object.entries(t)){let d=Q[a];d.textContent=k,d.hidden=!1}return}let e=ut(b,h.utterance_id,s);l.pause(),y(!1);try{await n.submit(e)}catch(a){if(a instanceof g){O.textContent=a.message,O.hidden=!1;return}f.push(e),A(),await L();return}A(),await L()}W.addEventListener("click",()=>void Lt()),u.addEventListener("keydown",t=>{if(h===null)return;let e=t.target;e&&(e.tagName==="INPUT"||e.tagName==="TEXTAREA")&&e.type!=="range"||(t.key>="1"&&t.key<="9"?(nt(M[Number(t.key)-1]),t.preventDefault()):t.key==="p"&&(ot(),t.preventDefault()))}),mt.addEventListener("submit",t=>{t.preventDefault();let e=pt.value.trim();if(!e){H.textContent="annotator id is required",H.hidden=!1;return}b=e,J.textContent=b,L()}),b?(J.textContent=b,L()):B(T)}var ct=document.getElementById("app");if(!ct)throw new Error('index.html must contain <div id="app">');dt(ct,new I(""));
